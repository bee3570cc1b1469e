"""
Bisection Search
Random bisection for multimodal 1-D maximization and a safeguarded Newton root solver
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

COLLAPSE_RTOL = 1e-7


def random_bisection(
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    iters: int,
    rng: np.random.Generator,
    x0: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Maximize objective on [lo, hi]; returns (argmax, max) over all points seen.

    Keeps a bracket (a, best, b) and samples uniformly inside it. A better sample
    becomes the new best and the bracket drops the far side of the old best; a
    worse sample replaces the endpoint on its side. When the bracket collapses
    the search restarts from [lo, hi], keeping the incumbent.
    """
    if not lo < hi:
        raise ValueError(f"Empty interval [{lo}, {hi}]")
    if x0 is None:
        best = rng.uniform(lo, hi)
    else:
        best = min(max(x0, lo), hi)
    f_best = objective(best)
    a, b = lo, hi
    width = hi - lo
    for _ in range(iters):
        if b - a <= COLLAPSE_RTOL * width:
            a, b = lo, hi
        x = rng.uniform(a, b)
        fx = objective(x)
        if fx > f_best:
            if x < best:
                b = best
            else:
                a = best
            best, f_best = x, fx
        elif x < best:
            a = x
        else:
            b = x
    return best, f_best


def random_bisection_index(
    objective: Callable[[int], float],
    n: int,
    rng: np.random.Generator,
    iters: Optional[int] = None,
    start: Optional[int] = None,
) -> Tuple[int, float]:
    """Random bisection over the indices 0..n-1 of a sorted list"""
    if n < 1:
        raise ValueError("Cannot search an empty list")
    cache: Dict[int, float] = {}

    def f(k: int) -> float:
        if k not in cache:
            cache[k] = objective(k)
        return cache[k]

    iters = n if iters is None else iters
    best = int(rng.integers(n)) if start is None else start
    f_best = f(best)
    a, b = 0, n - 1
    for _ in range(iters):
        if len(cache) == n:
            break
        if all(k in cache for k in range(a, b + 1)):
            a, b = 0, n - 1
        x = int(rng.integers(a, b + 1))
        if x == best:
            continue
        fx = f(x)
        if fx > f_best:
            if x < best:
                b = best
            else:
                a = best
            best, f_best = x, fx
        elif x < best:
            a = x
        else:
            b = x
    return best, f_best


def solve_stationary(
    derivs: Callable[[float], Tuple[float, float]],
    lo: float,
    hi: float,
    x0: Optional[float] = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> float:
    """
    Root of a decreasing function g on [lo, hi], where derivs(x) = (g, g').
    Newton steps are kept inside the sign bracket, falling back to bisection.
    Returns an endpoint when g does not change sign.
    """
    g_lo, _ = derivs(lo)
    if g_lo <= 0:
        return lo
    g_hi, _ = derivs(hi)
    if g_hi >= 0:
        return hi
    a, b = lo, hi
    x = 0.5 * (a + b) if x0 is None or not lo < x0 < hi else x0
    for _ in range(max_iter):
        g, h = derivs(x)
        if abs(g) <= tol:
            return x
        if g > 0:
            a = x
        else:
            b = x
        if b - a <= tol * max(1.0, abs(x)):
            break
        step = x - g / h if h < 0 else None
        x = step if step is not None and a < step < b else 0.5 * (a + b)
    return x
