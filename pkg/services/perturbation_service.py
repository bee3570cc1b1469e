"""
Perturbation Service
Macrostate perturbation of an inferred Ising model: the expected number of nodes
that switch off when node j is clamped to -1, estimated with Glauber dynamics
"""

import logging
from typing import Optional

import numpy as np

from data.network import NodeFields, WeightedNetwork
from data.schema import InitialState, KeystoneScan, McSpec, PerturbationResult
from services.diagnostics import rhat
from services.sampler_service import draw_states

logger = logging.getLogger(__name__)


class GlauberChain:
    """Single heat-bath chain in sequential site order, with optional clamped nodes"""

    def __init__(
        self,
        net: WeightedNetwork,
        fields: NodeFields,
        x: np.ndarray,
        rng: np.random.Generator,
        zero_valued: bool = False,
    ):
        self.W = net.to_dense()
        self.theta = np.asarray(fields.theta, dtype=float)
        self.x = np.asarray(x, dtype=float).copy()
        self.rng = rng
        self.zero_valued = zero_valued
        self.clamped: dict = {}
        self.h = self.W @ self.x + self.theta

    def clamp(self, j: int, value: float) -> None:
        self.clamped[j] = value
        self._set(j, value)

    def _set(self, i: int, value: float) -> None:
        d = value - self.x[i]
        if d:
            self.x[i] = value
            self.h += d * self.W[i]

    def sweep(self) -> None:
        for i in range(len(self.x)):
            if i in self.clamped:
                continue
            self._set(i, float(draw_states(self.h[i : i + 1], self.zero_valued, self.rng)[0]))

    def relax(self, n_sweeps: int) -> None:
        for _ in range(n_sweeps):
            self.sweep()

    def measure(self, n_sweeps: int, n_blocks: int) -> np.ndarray:
        """Block means of x over n_sweeps sweeps, shape (n_blocks, N)"""
        trace = np.empty((n_sweeps, len(self.x)))
        for t in range(n_sweeps):
            self.sweep()
            trace[t] = self.x
        usable = (n_sweeps // n_blocks) * n_blocks
        return trace[:usable].reshape(n_blocks, -1, len(self.x))


def _block_rhat(blocks: np.ndarray) -> float:
    r = rhat(blocks)
    r = r[~np.isnan(r)]
    return float(r.max()) if r.size else 1.0


def perturb_keystone(
    net: WeightedNetwork,
    fields: NodeFields,
    j: int,
    mc_spec: Optional[McSpec] = None,
    rng: Optional[np.random.Generator] = None,
    zero_valued: bool = False,
) -> PerturbationResult:
    """
    Relax into a macrostate and time-average the marginals, then clamp x_j = -1,
    continue from the same configuration and average again.
    z = 1/2 sum_{i != j} (mean before - mean after), with a batch-means standard error.
    """
    mc = mc_spec or McSpec()
    rng = rng if rng is not None else np.random.default_rng()
    N = net.n_nodes
    if not 0 <= j < N:
        raise ValueError(f"Node {j} out of range for N={N}")
    if mc.x_init == InitialState.PRESENT:
        x0 = np.ones(N)
    else:
        x0 = draw_states(np.zeros(N), zero_valued, rng).astype(float)

    chain = GlauberChain(net, fields, x0, rng, zero_valued)
    chain.relax(mc.t_relax)
    before = chain.measure(mc.n_measure, mc.n_blocks)
    chain.clamp(j, -1.0)
    chain.relax(mc.t_relax)
    after = chain.measure(mc.n_measure, mc.n_blocks)

    others = np.arange(N) != j
    mean_before = before.mean(axis=(0, 1))
    mean_after = after.mean(axis=(0, 1))
    z = 0.5 * float(np.sum(mean_before[others] - mean_after[others]))
    block_z = 0.5 * (before.mean(axis=1)[:, others] - after.mean(axis=1)[:, others]).sum(axis=1)
    stderr = float(block_z.std(ddof=1) / np.sqrt(len(block_z)))
    worst = max(_block_rhat(before), _block_rhat(after))
    equilibrated = worst < mc.r_hat_threshold
    if not equilibrated:
        logger.warning("Perturbation of node %d not equilibrated (block R-hat %.3f)", j, worst)
    return PerturbationResult(
        node_j=j,
        z_value=z,
        mc_stderr=stderr,
        marginals_before=[float(v) for v in mean_before],
        marginals_after=[float(v) for v in mean_after],
        equilibrated=equilibrated,
        r_hat=worst,
    )


def keystone_scan(
    net: WeightedNetwork,
    fields: NodeFields,
    n_nodes_sampled: int,
    mc_spec: Optional[McSpec] = None,
    rng: Optional[np.random.Generator] = None,
    zero_valued: bool = False,
    n_bins: int = 20,
) -> KeystoneScan:
    """Perturb uniformly sampled nodes, each from its own random macrostate"""
    rng = rng if rng is not None else np.random.default_rng()
    nodes = rng.integers(net.n_nodes, size=n_nodes_sampled)
    seeds = rng.integers(2**63 - 1, size=n_nodes_sampled)
    results = []
    for node, seed in zip(nodes, seeds):
        res = perturb_keystone(net, fields, int(node), mc_spec, np.random.default_rng(int(seed)), zero_valued)
        logger.info("node %d: z=%.3f +/- %.3f", res.node_j, res.z_value, res.mc_stderr)
        results.append(res)
    if results:
        counts, edges = np.histogram([r.z_value for r in results], bins=n_bins)
    else:
        counts, edges = np.array([], dtype=int), np.array([])
    return KeystoneScan(results=results, bin_edges=edges.tolist(), counts=counts.tolist())
