"""
Sampler Service
Kinetic Ising trajectories and equilibrium Metropolis sampling with R-hat controlled burn-in
"""

import logging
import math
import warnings
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, softmax

from data.errors import ConvergenceWarning, DataError
from data.network import NodeFields, WeightedNetwork
from data.schema import Alphabet, ChainDiagnostics, Dataset, DataKind
from services.diagnostics import effective_sample_size, integrated_time, split_rhat

logger = logging.getLogger(__name__)

RHAT_TARGET = 1.01
BURN_IN_WINDOW = 200
MAX_BURN_IN = 200_000


def _values(zero_valued: bool) -> np.ndarray:
    return np.array([-1, 0, 1]) if zero_valued else np.array([-1, 1])


def draw_states(s: np.ndarray, zero_valued: bool, rng: np.random.Generator) -> np.ndarray:
    """Draw x with P(x | s) proportional to exp(x s) for each local field in s"""
    u = rng.random(s.shape)
    if not zero_valued:
        return np.where(u < expit(2.0 * s), 1, -1)
    probs = softmax(np.stack([-s, np.zeros_like(s), s]), axis=0)
    return np.where(u < probs[0], -1, np.where(u < probs[0] + probs[1], 0, 1))


def _initial(x0: Union[str, Sequence[int], np.ndarray, None], n: int, zero_valued: bool, rng) -> np.ndarray:
    if x0 is None or (isinstance(x0, str) and x0 == "random"):
        return rng.choice(_values(zero_valued), size=n)
    if isinstance(x0, str) and x0 == "present":
        return np.ones(n, dtype=int)
    x = np.asarray(x0, dtype=int)
    if x.shape != (n,) or not np.isin(x, _values(zero_valued)).all():
        raise DataError("Initial state has the wrong size or leaves the alphabet")
    return x


# ============== KINETIC ==============

def sample_kinetic(
    net: WeightedNetwork,
    fields: NodeFields,
    M: int,
    x0: Union[str, Sequence[int], np.ndarray, None] = "random",
    rng: Optional[np.random.Generator] = None,
    zero_valued: bool = False,
) -> Dataset:
    """
    Trajectory of M synchronous transitions; returns the M + 1 visited states.
    Every node draws x_i(t+1) from exp(x s_i(t)) / Z(s_i(t)).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()
    N = net.n_nodes
    W = net.to_sparse()
    theta = np.asarray(fields.theta, dtype=float)
    X = np.empty((N, M + 1), dtype=np.int8)
    X[:, 0] = _initial(x0, N, zero_valued, rng)
    for t in range(M):
        s = W @ X[:, t].astype(float) + theta
        X[:, t + 1] = draw_states(s, zero_valued, rng)
    alphabet = Alphabet.ZERO_VALUED if zero_valued else Alphabet.BINARY
    return Dataset(states=X, kind=DataKind.MARKOV, alphabet=alphabet)


# ============== EQUILIBRIUM ==============

class MetropolisChains:
    """
    Parallel single-site Metropolis chains, vectorized across chains.
    Keeps the local fields H[c, i] = sum_j W_ij x_j + theta_i up to date.
    """

    def __init__(
        self,
        net: WeightedNetwork,
        fields: NodeFields,
        n_chains: int,
        rng: np.random.Generator,
        zero_valued: bool = False,
    ):
        self.W = net.to_dense()
        self.theta = np.asarray(fields.theta, dtype=float)
        self.rng = rng
        self.zero_valued = zero_valued
        self.n_nodes = net.n_nodes
        self.X = np.stack([_initial("random", self.n_nodes, zero_valued, rng) for _ in range(n_chains)]).astype(float)
        self.H = self.X @ self.W + self.theta

    def sweep(self) -> None:
        rng = self.rng
        n_chains = self.X.shape[0]
        for i in rng.permutation(self.n_nodes):
            x = self.X[:, i]
            if self.zero_valued:
                # uniform proposal among the two other values
                step = rng.integers(1, 3, size=n_chains)
                proposal = (x + 1 + step) % 3 - 1
            else:
                proposal = -x
            d = proposal - x
            accept = np.log(rng.random(n_chains)) < d * self.H[:, i]
            d = np.where(accept, d, 0.0)
            if d.any():
                self.X[:, i] += d
                self.H += d[:, None] * self.W[i]

    def run(self, n_sweeps: int, thin: int = 1) -> np.ndarray:
        """Returns the recorded states, shape (n_chains, n_sweeps // thin, N)"""
        draws = []
        for t in range(n_sweeps):
            self.sweep()
            if (t + 1) % thin == 0:
                draws.append(self.X.copy())
        if not draws:
            return np.empty((self.X.shape[0], 0, self.n_nodes))
        return np.stack(draws, axis=1)


def sample_equilibrium(
    net: WeightedNetwork,
    fields: NodeFields,
    M: int,
    n_chains: int = 4,
    rng: Optional[np.random.Generator] = None,
    zero_valued: bool = False,
    max_burn_in: int = MAX_BURN_IN,
) -> Tuple[Dataset, ChainDiagnostics]:
    """
    M i.i.d.-like samples of the equilibrium Ising model.
    Burn-in doubles its window until split R-hat < 1.01 on every node (or aborts at
    max_burn_in sweeps with a warning); draws are thinned by the estimated
    autocorrelation time and pooled across chains.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if n_chains < 1:
        raise ValueError("n_chains must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()
    chains = MetropolisChains(net, fields, n_chains, rng, zero_valued)
    N = net.n_nodes

    burn_in = 0
    window = BURN_IN_WINDOW
    converged = False
    thin = 1
    while burn_in < max_burn_in:
        trace = chains.run(window)
        burn_in += window
        r = split_rhat(trace)
        worst = float(np.nanmax(r)) if r.size and not np.all(np.isnan(r)) else 1.0
        if worst < RHAT_TARGET:
            converged = True
            thin = max(1, int(math.ceil(integrated_time(trace))))
            break
        window = min(2 * window, max_burn_in - burn_in) or window
    logger.info("equilibrium burn-in: %d sweeps, converged=%s, thin=%d", burn_in, converged, thin)
    if not converged:
        message = f"Burn-in did not reach R-hat < {RHAT_TARGET} within {max_burn_in} sweeps"
        warnings.warn(message, ConvergenceWarning)
        logger.warning(message)

    per_chain = int(math.ceil(M / n_chains))
    kept = chains.run(per_chain * thin, thin)
    pooled = kept.reshape(-1, N)[:M]
    r_kept = split_rhat(kept) if N else np.array([])
    sufficient = per_chain >= 4 and (n_chains >= 2 or per_chain >= 8)
    diagnostics = ChainDiagnostics(
        r_hat=[float(v) for v in np.atleast_1d(r_kept)] if sufficient else [],
        ess=[float(v) for v in np.atleast_1d(effective_sample_size(kept))] if sufficient and N else [],
        n_chains=n_chains,
        burn_in=burn_in,
        thin=thin,
        kept_samples=int(kept.shape[0] * kept.shape[1]),
        converged=converged,
        sufficient=sufficient,
    )
    alphabet = Alphabet.ZERO_VALUED if zero_valued else Alphabet.BINARY
    dataset = Dataset(states=pooled.T.astype(np.int8), kind=DataKind.IID, alphabet=alphabet)
    return dataset, diagnostics
