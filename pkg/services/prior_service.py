"""
MDL Prior Service
Description-length terms (negative log-priors) of weights, weight categories and node fields
"""

import logging
import math
from typing import TYPE_CHECKING, Optional, Sequence

from scipy.optimize import minimize_scalar

from data.errors import CategoryError
from data.network import CategoryStats, WeightCategories
from data.schema import PriorHyper, RunReport

if TYPE_CHECKING:
    from services.likelihood_service import ModelState

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
LOG_LAMBDA_BOUNDS = (-6.0, 6.0)


# ============== HELPERS ==============

def log_binom(n: float, k: float) -> float:
    """log C(n, k) via log-gamma, with C(-1, -1) = 1"""
    if n == k:
        return 0.0
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_expm1(x: float) -> float:
    return math.log(math.expm1(x))


def log_sinh(x: float) -> float:
    if x > 20:
        return x - LOG2 + math.log1p(-math.exp(-2 * x))
    return math.log(math.sinh(x))


def on_grid(w: float, delta: float) -> bool:
    return math.isclose(w, delta * round(w / delta), rel_tol=1e-9, abs_tol=1e-6 * delta)


# ============== WEIGHT PRIOR ==============

def qlaplace_neglogmass(w: float, lam: float, delta: float) -> float:
    """
    -log of the quantized Laplace mass of a nonzero grid value.
    Returns +inf for w = 0 or an off-grid value (excluded from the support).
    """
    if w == 0 or not on_grid(w, delta):
        return math.inf
    return lam * abs(w) - log_expm1(lam * delta) + LOG2


def neglog_prior_weights_from_stats(n_nodes: int, stats: CategoryStats, lam: float, delta: float) -> float:
    E, K = stats.total, stats.n_categories
    if K > E or (K == 0 and E > 0):
        raise CategoryError(f"Invalid category structure: K={K}, E={E}")
    if stats.has_zero:
        raise CategoryError("Weight categories cannot take the value 0")
    n_pairs = n_nodes * (n_nodes - 1) // 2
    if E > n_pairs:
        raise CategoryError(f"E={E} exceeds the {n_pairs} available pairs")
    return (
        -stats.sum_log_fact
        + math.lgamma(E + 1)
        + log_binom(E - 1, K - 1)
        + lam * stats.sum_abs
        - K * log_expm1(lam * delta)
        + K * LOG2
        + math.log(max(E, 1))
        + log_binom(n_pairs, E)
        + math.log(n_pairs + 1)
    )


def _stats_from_lists(counts: Sequence[int], values: Sequence[float]) -> CategoryStats:
    if len(counts) != len(values):
        raise CategoryError("Category counts and values differ in length")
    if any(c < 1 for c in counts):
        raise CategoryError("Category counts must be strictly positive")
    if len(set(values)) != len(values):
        raise CategoryError("Duplicate category values")
    return CategoryStats(
        n_categories=len(values),
        total=int(sum(counts)),
        sum_log_fact=sum(math.lgamma(c + 1) for c in counts),
        sum_abs=sum(abs(v) for v in values),
        has_zero=any(v == 0 for v in values),
    )


def neglog_prior_weights(
    E: int,
    K: int,
    m: Sequence[int],
    z: Sequence[float],
    N: int,
    hyper: Optional[PriorHyper] = None,
) -> float:
    """Description length of the network: sparsity, category sizes and category values"""
    hyper = hyper or PriorHyper()
    stats = _stats_from_lists(m, z)
    if stats.n_categories != K or stats.total != E:
        raise CategoryError(f"Counts {list(m)} do not match E={E}, K={K}")
    return neglog_prior_weights_from_stats(N, stats, hyper.lam, hyper.delta)


# ============== FIELD PRIOR ==============

def neglog_prior_theta_from_stats(n_nodes: int, stats: CategoryStats, lam: float, delta: float) -> float:
    N, K = n_nodes, stats.n_categories
    if stats.total != N:
        raise CategoryError(f"Field category counts sum to {stats.total}, expected {N}")
    zero = 1 if stats.has_zero else 0
    return (
        -stats.sum_log_fact
        + math.lgamma(N + 1)
        + log_binom(N - 1, K - 1)
        + math.log(max(N, 1))
        + lam * stats.sum_abs
        - (K - zero) * log_sinh(lam * delta)
        - zero * math.log(-math.expm1(-lam * delta))
    )


def neglog_prior_theta(
    N: int,
    K_theta: int,
    n: Sequence[int],
    u: Sequence[float],
    hyper: Optional[PriorHyper] = None,
) -> float:
    """Description length of the node fields (zero category allowed)"""
    hyper = hyper or PriorHyper()
    stats = _stats_from_lists(n, u)
    if stats.n_categories != K_theta:
        raise CategoryError(f"Got {stats.n_categories} field categories, expected {K_theta}")
    return neglog_prior_theta_from_stats(N, stats, hyper.lambda_theta, hyper.delta_theta)


# ============== TOTALS ==============

def prior_weights_of(n_nodes: int, categories: WeightCategories) -> float:
    return neglog_prior_weights_from_stats(n_nodes, categories.stats(), categories.lam, categories.delta)


def prior_theta_of(n_nodes: int, categories: WeightCategories) -> float:
    return neglog_prior_theta_from_stats(n_nodes, categories.stats(), categories.lam, categories.delta)


def description_length(state: "ModelState", hyper: Optional[PriorHyper] = None) -> float:
    """
    -loglik + weight prior + field prior, in nats.
    Grid spacings and scales default to those carried by the state's category sets.
    """
    N = state.n_nodes
    if hyper is None:
        prior_w = prior_weights_of(N, state.net.categories)
        prior_t = prior_theta_of(N, state.fields.categories)
    else:
        prior_w = neglog_prior_weights_from_stats(N, state.net.categories.stats(), hyper.lam, hyper.delta)
        prior_t = neglog_prior_theta_from_stats(
            N, state.fields.categories.stats(), hyper.lambda_theta, hyper.delta_theta
        )
    return -state.loglik() + prior_w + prior_t


def recompute_description_length(report: RunReport) -> float:
    """Rebuild the description length from the fields of a run report"""
    z = [v for v, _ in report.categories]
    m = [c for _, c in report.categories]
    u = [v for v, _ in report.theta_categories]
    n = [c for _, c in report.theta_categories]
    hyper = PriorHyper(
        delta=report.delta,
        lam=report.lam,
        delta_theta=report.delta_theta,
        lambda_theta=report.lambda_theta,
    )
    prior_w = neglog_prior_weights(report.E, report.K, m, z, report.n_nodes, hyper)
    prior_t = neglog_prior_theta(report.n_nodes, len(u), n, u, hyper) if u else 0.0
    return -report.loglik + prior_w + prior_t


# ============== HYPERPARAMETER OPTIMIZATION ==============

def optimize_lambda(n_nodes: int, categories: WeightCategories, theta: bool = False) -> float:
    """
    Minimize the prior over log(lambda) in [-6, 6] with the category values held fixed.
    The likelihood does not depend on lambda. Updates categories.lam and returns it.
    """
    if categories.K == 0:
        return categories.lam
    stats = categories.stats()
    term = neglog_prior_theta_from_stats if theta else neglog_prior_weights_from_stats

    def objective(log_lam: float) -> float:
        return term(n_nodes, stats, math.exp(log_lam), categories.delta)

    current = objective(math.log(categories.lam))
    res = minimize_scalar(objective, bounds=LOG_LAMBDA_BOUNDS, method="bounded")
    if res.fun < current:
        categories.lam = float(math.exp(res.x))
        if abs(res.x - LOG_LAMBDA_BOUNDS[0]) < 1e-3 or abs(res.x - LOG_LAMBDA_BOUNDS[1]) < 1e-3:
            logger.warning("Optimal lambda %.3g sits at the search boundary", categories.lam)
    logger.debug("lambda%s -> %.6g", "_theta" if theta else "", categories.lam)
    return categories.lam
