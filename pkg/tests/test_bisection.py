import math

import numpy as np
import pytest

from services.bisection import random_bisection, random_bisection_index, solve_stationary


def test_unimodal_maximum(rng):
    x, f = random_bisection(lambda x: -(x - 0.3) ** 2, -1.0, 1.0, 60, rng)
    assert x == pytest.approx(0.3, abs=1e-3)
    assert f == pytest.approx(0.0, abs=1e-6)


def test_bimodal_finds_the_global_peak():
    def objective(x):
        # narrow local peak at -1.5, broad global peak at 0.9
        return math.exp(-((x + 1.5) ** 2) / 0.01) + 1.5 * math.exp(-((x - 0.9) ** 2) / 0.5)

    hits = 0
    for seed in range(10):
        x, _ = random_bisection(objective, -2.0, 2.0, 200, np.random.default_rng(seed))
        hits += abs(x - 0.9) < 0.01
    assert hits >= 8


def test_incumbent_is_never_lost(rng):
    x, f = random_bisection(lambda x: -abs(x - 0.5), 0.0, 1.0, 1, rng, x0=0.5)
    assert x == 0.5
    assert f == 0.0


def test_empty_interval_is_an_error(rng):
    with pytest.raises(ValueError):
        random_bisection(lambda x: x, 1.0, 1.0, 5, rng)


def test_index_search_over_sorted_list(rng):
    values = [-3.0, -1.0, 0.5, 2.0, 4.0]
    k, f = random_bisection_index(lambda k: -abs(values[k] - 0.4), len(values), rng, iters=50)
    assert k == 2
    assert f == pytest.approx(-0.1)


def test_index_search_evaluates_each_index_once(rng):
    calls = []

    def objective(k):
        calls.append(k)
        return float(k % 3)

    random_bisection_index(objective, 7, rng, iters=100)
    assert len(calls) == len(set(calls))


def test_solve_stationary_newton_root():
    root = solve_stationary(lambda x: (2.0 - x, -1.0), -10.0, 10.0)
    assert root == pytest.approx(2.0)
    root = solve_stationary(lambda x: (math.tanh(1.0 - x), -(1 - math.tanh(1.0 - x) ** 2)), -5.0, 5.0, x0=4.9)
    assert root == pytest.approx(1.0, abs=1e-9)


def test_solve_stationary_clamps_to_the_interval():
    assert solve_stationary(lambda x: (1.0, 0.0), 0.0, 3.0) == 3.0
    assert solve_stationary(lambda x: (-1.0, 0.0), 0.0, 3.0) == 0.0
