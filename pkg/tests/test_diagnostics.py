import numpy as np
import pytest

from services.diagnostics import effective_sample_size, integrated_time, rhat, split_rhat


def _ar1(rng, rho, n_chains=4, n_draws=5000):
    x = np.empty((n_chains, n_draws))
    x[:, 0] = rng.normal(size=n_chains)
    for t in range(1, n_draws):
        x[:, t] = rho * x[:, t - 1] + np.sqrt(1 - rho**2) * rng.normal(size=n_chains)
    return x


def test_constant_chains_have_unit_rhat():
    assert float(rhat(np.ones((4, 100)))) == 1.0
    assert float(split_rhat(np.ones((4, 100)))) == 1.0


def test_chains_stuck_at_different_values_diverge():
    chains = np.repeat([[0.0], [1.0]], 50, axis=1)
    assert float(rhat(chains)) == np.inf


def test_iid_chains_mix(rng):
    assert float(rhat(rng.normal(size=(4, 1000)))) == pytest.approx(1.0, abs=0.01)


def test_shifted_chains_are_flagged(rng):
    chains = rng.normal(size=(4, 500)) + 2.0 * np.arange(4)[:, None]
    assert float(rhat(chains)) > 1.1


def test_split_rhat_detects_drift_within_chains(rng):
    trend = np.linspace(0.0, 10.0, 1000)
    chains = trend + rng.normal(size=(4, 1000))
    assert float(rhat(chains)) < 1.01
    assert float(split_rhat(chains)) > 1.1


def test_rhat_is_per_variable(rng):
    chains = rng.normal(size=(3, 200, 5))
    assert rhat(chains).shape == (5,)
    assert split_rhat(chains).shape == (5,)


def test_rhat_needs_a_draw_axis():
    with pytest.raises(ValueError):
        rhat(np.ones(10))


def test_ess_of_independent_draws(rng):
    chains = rng.normal(size=(4, 1000))
    ess = float(effective_sample_size(chains))
    assert 0.7 * 4000 < ess <= 4000
    assert integrated_time(chains) < 1.5


def test_ess_shrinks_with_autocorrelation(rng):
    chains = _ar1(rng, 0.9)
    ess = float(effective_sample_size(chains))
    # tau = (1 + rho) / (1 - rho) = 19
    assert ess < 0.15 * chains.size
    assert integrated_time(chains) == pytest.approx(19.0, rel=0.35)


def test_ess_of_constant_chain_is_the_draw_count():
    assert float(effective_sample_size(np.zeros((2, 50)))) == 100
