import itertools
import math

import numpy as np
import pytest

from data.errors import DataError
from data.network import NodeFields, WeightedNetwork
from data.schema import Alphabet, DataKind
from services.sampler_service import draw_states, sample_equilibrium, sample_kinetic


def test_kinetic_trajectory_has_m_plus_one_states(small_net, small_fields, rng):
    data = sample_kinetic(small_net, small_fields, 10, rng=rng)
    assert data.states.shape == (4, 11)
    assert data.kind == DataKind.MARKOV
    assert data.n_units == 10


def test_kinetic_empty_network_is_unbiased(rng):
    data = sample_kinetic(WeightedNetwork(5), NodeFields(5), 2000, rng=rng)
    assert abs(data.states.mean()) < 0.05


def test_kinetic_strong_field_saturates(rng):
    data = sample_kinetic(WeightedNetwork(3), NodeFields(3, theta=[5.0] * 3), 500, rng=rng)
    assert data.states[:, 1:].mean() > 0.99


def test_kinetic_transition_frequencies(rng):
    w = 0.5
    net = WeightedNetwork.from_edges(2, [(0, 1, w)])
    X = sample_kinetic(net, NodeFields(2), 20_000, rng=rng).states
    prev, nxt = X[0, :-1], X[1, 1:]
    freq = np.mean(nxt[prev == 1] == 1)
    assert freq == pytest.approx(math.exp(w) / (2 * math.cosh(w)), abs=0.02)


def test_kinetic_present_start(small_net, small_fields, rng):
    data = sample_kinetic(small_net, small_fields, 3, x0="present", rng=rng)
    assert np.all(data.states[:, 0] == 1)


def test_kinetic_rejects_bad_initial_state(small_net, small_fields, rng):
    with pytest.raises(DataError):
        sample_kinetic(small_net, small_fields, 5, x0=[1, 2, 1, 1], rng=rng)
    with pytest.raises(DataError):
        sample_kinetic(small_net, small_fields, 5, x0=[1, 1], rng=rng)


def test_kinetic_needs_one_transition(small_net, small_fields, rng):
    with pytest.raises(ValueError):
        sample_kinetic(small_net, small_fields, 0, rng=rng)


def test_zero_valued_draws_stay_in_the_alphabet(rng):
    x = draw_states(np.linspace(-2, 2, 1000), True, rng)
    assert set(np.unique(x)) <= {-1, 0, 1}
    data = sample_kinetic(WeightedNetwork(3), NodeFields(3), 50, rng=rng, zero_valued=True)
    assert data.alphabet == Alphabet.ZERO_VALUED


def test_equilibrium_pair_matches_boltzmann(rng):
    w, theta = 0.5, [0.2, -0.1]
    net = WeightedNetwork.from_edges(2, [(0, 1, w)])
    data, diag = sample_equilibrium(net, NodeFields(2, theta=theta), 40_000, rng=rng)
    assert data.kind == DataKind.IID
    assert data.n_samples == 40_000
    assert diag.converged

    states = list(itertools.product([-1, 1], repeat=2))
    weights = np.array([math.exp(w * a * b + theta[0] * a + theta[1] * b) for a, b in states])
    exact = weights / weights.sum()
    X = data.states
    empirical = np.array([np.mean((X[0] == a) & (X[1] == b)) for a, b in states])
    assert 0.5 * np.abs(empirical - exact).sum() < 0.015


def test_equilibrium_independent_marginals(rng):
    theta = [0.5, -1.0, 0.0]
    data, _ = sample_equilibrium(WeightedNetwork(3), NodeFields(3, theta=theta), 20_000, rng=rng)
    assert np.allclose(data.states.mean(axis=1), np.tanh(theta), atol=0.03)


def test_equilibrium_zero_valued_marginals(rng):
    data, _ = sample_equilibrium(WeightedNetwork(2), NodeFields(2), 6000, rng=rng, zero_valued=True)
    for value in (-1, 0, 1):
        assert np.mean(data.states == value) == pytest.approx(1 / 3, abs=0.03)


def test_single_short_chain_is_insufficient(small_net, small_fields, rng):
    data, diag = sample_equilibrium(small_net, small_fields, 1, n_chains=1, rng=rng)
    assert data.n_samples == 1
    assert not diag.sufficient
    assert diag.r_hat == []


def test_equilibrium_argument_checks(small_net, small_fields, rng):
    with pytest.raises(ValueError):
        sample_equilibrium(small_net, small_fields, 0, rng=rng)
    with pytest.raises(ValueError):
        sample_equilibrium(small_net, small_fields, 10, n_chains=0, rng=rng)
