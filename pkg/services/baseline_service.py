"""
Baseline Service
Comparison reconstructions: L1-penalized MAP with K-fold cross-validation,
decimation of an unregularized fit, and MAP under the true (Gaussian) weight prior
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from config import settings
from data.errors import ConvergenceWarning, DataError
from data.network import NodeFields, WeightedNetwork
from data.schema import (
    BaselineConfig,
    CvResult,
    Dataset,
    DataKind,
    DecimationStep,
    DecimationStop,
    DecimationTrajectory,
    ModelKind,
)
from services.bisection import solve_stationary
from services.likelihood_service import ModelState, heldout_loglik
from services.prior_service import log_binom

logger = logging.getLogger(__name__)

GridSpec = Union[Tuple[float, float, int], Sequence[float]]
LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


# ============== ENTRY PENALTIES ==============

class L1Penalty:
    """lam * |w| per entry; lam = 0 gives the unregularized fit"""

    def __init__(self, lam: float):
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.lam = lam

    def cost(self, w: float) -> float:
        return self.lam * abs(w)

    def total(self, net: WeightedNetwork) -> float:
        return self.lam * sum(abs(w) for _, _, w in net.edges())

    def sparsity_delta(self, n_pairs: int, E: int, change: int) -> float:
        return 0.0

    def best_value(self, state: ModelState, i: int, j: int, bound: float) -> float:
        """Exact 1-D maximizer of loglik - lam|w| (zero iff the subgradient contains 0)"""
        g0, _ = state.entry_derivatives(i, j, 0.0)
        if abs(g0) <= self.lam:
            return 0.0
        sign = 1.0 if g0 > 0 else -1.0

        def derivs(w: float) -> Tuple[float, float]:
            g, h = state.entry_derivatives(i, j, w)
            return g - sign * self.lam, h

        lo, hi = (0.0, bound) if sign > 0 else (-bound, 0.0)
        return solve_stationary(derivs, lo, hi, x0=state.net.weight(i, j) or None)


class GaussianPenalty:
    """
    -log N(w; mu, sigma) on nonzero entries plus the uniform sparsity prior
    log C(P, E) + log(P + 1) over the number of nonzero entries.
    """

    def __init__(self, mu: float, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be strictly positive")
        self.mu = mu
        self.sigma = sigma

    def cost(self, w: float) -> float:
        if w == 0:
            return 0.0
        return (w - self.mu) ** 2 / (2 * self.sigma**2) + math.log(self.sigma) + LOG_SQRT_2PI

    def total(self, net: WeightedNetwork) -> float:
        n_pairs = net.n_nodes * (net.n_nodes - 1) // 2
        return sum(self.cost(w) for _, _, w in net.edges()) + log_binom(n_pairs, net.E) + math.log(n_pairs + 1)

    def sparsity_delta(self, n_pairs: int, E: int, change: int) -> float:
        return log_binom(n_pairs, E + change) - log_binom(n_pairs, E)

    def best_value(self, state: ModelState, i: int, j: int, bound: float) -> float:
        """Best nonzero value; the caller compares it with zero"""
        inv_var = 1.0 / self.sigma**2

        def derivs(w: float) -> Tuple[float, float]:
            g, h = state.entry_derivatives(i, j, w)
            return g - (w - self.mu) * inv_var, h - inv_var

        return solve_stationary(derivs, -bound, bound, x0=state.net.weight(i, j) or self.mu)


Penalty = Union[L1Penalty, GaussianPenalty]


# ============== COORDINATE FITTER ==============

class CoordinateFitter:
    """
    Coordinate ascent of loglik - penalty(W) over entries of W (free real values)
    and, optionally, unpenalized node fields.
    """

    def __init__(
        self,
        state: ModelState,
        penalty: Penalty,
        cfg: Optional[BaselineConfig] = None,
        active: Optional[Iterable[Tuple[int, int]]] = None,
    ):
        self.state = state
        self.penalty = penalty
        self.cfg = cfg or BaselineConfig()
        self.active = None if active is None else sorted(set(active))
        N = state.n_nodes
        self.n_pairs = N * (N - 1) // 2
        self.trace: List[float] = []

    def objective(self) -> float:
        return self.state.loglik() - self.penalty.total(self.state.net)

    def candidates(self) -> List[Tuple[int, int]]:
        """Fixed active set, or KKT violators among absent pairs plus the nonzero pairs"""
        if self.active is not None:
            return self.active
        net = self.state.net
        N = self.state.n_nodes
        if N < 2:
            return []
        G = np.abs(self.state.gradient_matrix())
        iu, ju = np.triu_indices(N, k=1)
        flat = G[iu, ju]
        if isinstance(self.penalty, L1Penalty):
            picked = np.flatnonzero(flat > self.penalty.lam)
        else:
            n_keep = min(int(math.ceil(self.cfg.kappa * N)), flat.size)
            picked = np.lexsort((np.arange(flat.size), -flat))[:n_keep]
        pairs = {(int(iu[k]), int(ju[k])) for k in picked}
        return sorted(pairs | set(net.pairs()))

    def update_entry(self, i: int, j: int) -> bool:
        st = self.state
        w0 = st.net.weight(i, j)
        E = st.net.E
        options = {0.0, st.net.categories.snap(self.penalty.best_value(st, i, j, self.cfg.weight_range))}
        best, best_gain = w0, 0.0
        for w in options:
            if w == w0:
                continue
            change = int(w != 0) - int(w0 != 0)
            gain = (
                st.delta_loglik_edge(i, j, w)
                - (self.penalty.cost(w) - self.penalty.cost(w0))
                - self.penalty.sparsity_delta(self.n_pairs, E, change)
            )
            if gain > best_gain:
                best, best_gain = w, gain
        if best_gain > 0:
            st.apply_entry(i, j, best, create=True)
            return True
        return False

    def update_theta(self, i: int) -> bool:
        st = self.state
        bound = self.cfg.theta_range
        value = solve_stationary(lambda t: st.theta_derivatives(i, t), -bound, bound, x0=st.fields.value(i))
        value = st.fields.categories.snap(value)
        if value != st.fields.value(i) and st.delta_loglik_theta({i: value}) > 0:
            st.apply_theta(i, value)
            return True
        return False

    def fit(self) -> List[float]:
        """Sweep until the relative objective change drops below tol; returns the objective trace"""
        self.trace = [self.objective()]
        converged = False
        for sweep in range(self.cfg.max_sweeps):
            changed = 0
            if self.cfg.fit_theta:
                changed += sum(self.update_theta(i) for i in range(self.state.n_nodes))
            for i, j in self.candidates():
                changed += self.update_entry(i, j)
            self.trace.append(self.objective())
            gain = self.trace[-1] - self.trace[-2]
            logger.debug("sweep %d: objective=%.6f E=%d changed=%d", sweep + 1, self.trace[-1], self.state.net.E, changed)
            if changed == 0 or gain <= self.cfg.tol * max(1.0, abs(self.trace[-1])):
                converged = True
                break
        if not converged:
            warnings.warn(f"Coordinate ascent stopped after {self.cfg.max_sweeps} sweeps", ConvergenceWarning)
        return self.trace


# ============== L1 ==============

def reconstruct_l1(
    data: Dataset,
    model_kind: ModelKind,
    lam: float,
    cfg: Optional[BaselineConfig] = None,
    columns: Optional[Sequence[int]] = None,
) -> Tuple[WeightedNetwork, NodeFields]:
    """L1-penalized MAP (Laplace prior) by coordinate ascent; weights are free reals"""
    if lam <= 0:
        raise ValueError("lambda must be strictly positive")
    state = ModelState(data, model_kind, columns=columns)
    CoordinateFitter(state, L1Penalty(lam), cfg).fit()
    logger.info("L1 fit at lambda=%.4g: E=%d", lam, state.net.E)
    return state.net, state.fields


def make_folds(data: Dataset, n_folds: int, rng: np.random.Generator) -> List[np.ndarray]:
    """
    Disjoint held-out unit sets: shuffled samples for iid data,
    contiguous blocks of transitions for Markov data.
    """
    units = data.n_units
    if n_folds < 2:
        raise DataError("Cross-validation needs at least 2 folds")
    if units < n_folds:
        raise DataError(f"{units} samples cannot be split into {n_folds} folds")
    if data.kind == DataKind.MARKOV:
        return np.array_split(np.arange(units), n_folds)
    return [np.sort(f) for f in np.array_split(rng.permutation(units), n_folds)]


def _lambda_grid(grid_spec: GridSpec) -> List[float]:
    if isinstance(grid_spec, tuple) and len(grid_spec) == 3 and isinstance(grid_spec[2], int):
        lo, hi, n = grid_spec
        if lo <= 0 or hi < lo or n < 1:
            raise ValueError(f"Invalid lambda grid {grid_spec}")
        return [float(x) for x in np.geomspace(lo, hi, n)]
    return sorted(float(x) for x in grid_spec)


def cross_validate_l1(
    data: Dataset,
    model_kind: ModelKind,
    n_folds: int,
    grid_spec: GridSpec,
    cfg: Optional[BaselineConfig] = None,
    refine_iters: int = 6,
) -> CvResult:
    """
    Pick lambda maximizing the mean held-out log-likelihood over K folds:
    a log grid scan followed by bounded refinement around the best interior point.
    """
    cfg = cfg or BaselineConfig()
    rng = np.random.default_rng(cfg.seed)
    folds = make_folds(data, n_folds, rng)
    all_units = np.arange(data.n_units)
    train_sets = [np.setdiff1d(all_units, test) for test in folds]
    evaluated = {}

    def fold_score(lam: float, k: int) -> Tuple[float, int]:
        net, fields = reconstruct_l1(data, model_kind, lam, cfg, columns=train_sets[k])
        return heldout_loglik(net, fields, data, model_kind, columns=folds[k]), net.E

    def evaluate(lam: float) -> float:
        if lam not in evaluated:
            if cfg.threads > 1:
                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    results = list(pool.map(lambda k: fold_score(lam, k), range(n_folds)))
            else:
                results = [fold_score(lam, k) for k in range(n_folds)]
            evaluated[lam] = (float(np.mean([r[0] for r in results])), [r[1] for r in results])
            logger.info("CV lambda=%.4g: held-out loglik %.4f", lam, evaluated[lam][0])
        return evaluated[lam][0]

    grid = _lambda_grid(grid_spec)
    for lam in grid:
        evaluate(lam)
    scores = [evaluated[lam][0] for lam in grid]
    best = int(np.argmax(scores))
    lambda_hat = grid[best]
    refined = False
    if 0 < best < len(grid) - 1 and refine_iters > 0:
        res = minimize_scalar(
            lambda t: -evaluate(float(math.exp(t))),
            bounds=(math.log(grid[best - 1]), math.log(grid[best + 1])),
            method="bounded",
            options={"maxiter": refine_iters, "xatol": 1e-2},
        )
        candidate = float(math.exp(res.x))
        if evaluate(candidate) > evaluated[lambda_hat][0]:
            lambda_hat, refined = candidate, True
    lams = sorted(evaluated)
    return CvResult(
        lambda_grid=lams,
        heldout_mean=[evaluated[lam][0] for lam in lams],
        lambda_hat=lambda_hat,
        fits=[evaluated[lam][1] for lam in lams],
        n_folds=n_folds,
        refined=refined,
    )


# ============== DECIMATION ==============

def decimate(
    data: Dataset,
    model_kind: ModelKind,
    step_fraction: float = 0.02,
    stop: Optional[DecimationStop] = None,
    cfg: Optional[BaselineConfig] = None,
) -> DecimationTrajectory:
    """
    Unregularized fit on all pairs, then repeatedly freeze the smallest-|W| active
    entries to zero and refit the rest, recording (E_active, max loglik) per step.
    """
    if not 0 < step_fraction < 1:
        raise ValueError("step_fraction must lie in (0, 1)")
    stop = stop or DecimationStop()
    cfg = cfg or BaselineConfig()
    N = data.n_nodes
    if N > settings.decimation_max_nodes:
        raise DataError(f"Decimation starts from all {N * (N - 1) // 2} pairs; N={N} exceeds the cap")
    traj = DecimationTrajectory(step_fraction=step_fraction)
    if N > settings.decimation_warn_nodes:
        message = f"Decimation on N={N} fits O(N^2) entries; this will be slow"
        logger.warning(message)
        traj.warnings.append(message)

    state = ModelState(data, model_kind)
    active = [(i, j) for i in range(N) for j in range(i + 1, N)]
    ml = L1Penalty(0.0)

    def record() -> DecimationStep:
        CoordinateFitter(state, ml, cfg, active=active).fit()
        step = DecimationStep(
            E_active=len(active),
            loglik=state.loglik(),
            edges=state.net.edges() if stop.record_networks else None,
        )
        traj.steps.append(step)
        logger.info("decimation: E_active=%d loglik=%.6f", step.E_active, step.loglik)
        return step

    previous = record()
    while True:
        if stop.target_edges is not None and len(active) <= stop.target_edges:
            traj.stop_reason = "target"
            break
        if not active:
            traj.stop_reason = "exhausted"
            break
        n_remove = max(1, math.ceil(step_fraction * len(active)))
        if stop.target_edges is not None:
            n_remove = min(n_remove, len(active) - stop.target_edges)
        order = sorted(active, key=lambda p: (abs(state.net.weight(*p)), p))
        frozen = order[:n_remove]
        state.apply_entries([(i, j, 0.0) for i, j in frozen])
        active = sorted(set(active) - set(frozen))
        step = record()
        loss = (previous.loglik - step.loglik) / max(abs(previous.loglik), 1e-300) / n_remove
        previous = step
        # the plateau has ended once a removal costs more than the threshold per edge
        if stop.use_plateau and active and loss > stop.plateau_threshold:
            traj.stop_reason = "plateau heuristic"
            break
    return traj


# ============== TRUE PRIOR ==============

def reconstruct_true_prior(
    data: Dataset,
    model_kind: ModelKind,
    mu: float,
    sigma: float,
    cfg: Optional[BaselineConfig] = None,
) -> Tuple[WeightedNetwork, NodeFields]:
    """MAP under a Gaussian slab on nonzero weights and the uniform sparsity prior"""
    state = ModelState(data, model_kind)
    CoordinateFitter(state, GaussianPenalty(mu, sigma), cfg).fit()
    logger.info("true-prior fit (mu=%.4g, sigma=%.4g): E=%d", mu, sigma, state.net.E)
    return state.net, state.fields
