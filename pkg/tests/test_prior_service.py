import math

import numpy as np
import pytest

from data.errors import CategoryError
from data.network import NodeFields, WeightCategories, WeightedNetwork
from data.schema import Alphabet, Dataset, DataKind, ModelKind, PriorHyper, RunReport
from services.likelihood_service import ModelState
from services.prior_service import (
    description_length,
    log_binom,
    neglog_prior_theta,
    neglog_prior_weights,
    optimize_lambda,
    prior_weights_of,
    qlaplace_neglogmass,
    recompute_description_length,
)


def test_log_binom_conventions():
    assert log_binom(-1, -1) == 0.0
    assert log_binom(5, 0) == pytest.approx(0.0)
    assert log_binom(6, 2) == pytest.approx(math.log(15))
    assert log_binom(3, 4) == -math.inf


def test_qlaplace_unit_grid_value():
    expected = -math.log(math.exp(-1) * (math.e - 1) / 2)
    assert qlaplace_neglogmass(1.0, 1.0, 1.0) == pytest.approx(expected)
    assert qlaplace_neglogmass(1.0, 1.0, 1.0) == pytest.approx(1.1514, abs=1e-3)


def test_qlaplace_excludes_zero_and_off_grid_values():
    assert qlaplace_neglogmass(0.0, 1.0, 1.0) == math.inf
    assert qlaplace_neglogmass(0.3, 1.0, 1.0) == math.inf


@pytest.mark.parametrize("lam,delta", [(1.0, 1.0), (2.0, 0.5), (0.3, 0.1)])
def test_qlaplace_mass_is_normalized(lam, delta):
    n_steps = int(60 / (lam * delta)) + 1
    total = 0.0
    for k in range(1, n_steps):
        total += 2 * math.exp(-qlaplace_neglogmass(k * delta, lam, delta))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_empty_network_prior_is_log_of_pair_count_plus_one():
    assert neglog_prior_weights(0, 0, [], [], 3) == pytest.approx(math.log(4))


def test_single_edge_prior():
    hyper = PriorHyper(delta=1e-8, lam=1.0)
    expected = 0.5 - math.log(math.expm1(1e-8)) + math.log(2) + math.log(3) + math.log(4)
    value = neglog_prior_weights(1, 1, [1], [0.5], 3, hyper)
    assert value == pytest.approx(expected, rel=1e-12)
    assert value == pytest.approx(22.10, abs=0.01)


def test_grouped_categories_are_cheaper_than_one_per_edge():
    grouped = neglog_prior_weights(4, 1, [4], [0.5], 10)
    separate = neglog_prior_weights(4, 4, [1, 1, 1, 1], [0.5, 0.5 + 1e-8, 0.5 + 2e-8, 0.5 + 3e-8], 10)
    assert grouped < separate


def test_weight_prior_rejects_invalid_categories():
    with pytest.raises(CategoryError):
        neglog_prior_weights(2, 1, [0], [0.5], 4)
    with pytest.raises(CategoryError):
        neglog_prior_weights(1, 1, [1], [0.0], 4)
    with pytest.raises(CategoryError):
        neglog_prior_weights(2, 2, [1, 1], [0.5, 0.5], 4)


def test_weight_prior_grows_with_sparse_edge_count():
    values = [neglog_prior_weights(E, 1, [E], [0.5], 100) for E in range(1, 20)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_weight_prior_is_permutation_invariant():
    a = neglog_prior_weights(5, 2, [2, 3], [0.5, -0.25], 6)
    b = neglog_prior_weights(5, 2, [3, 2], [-0.25, 0.5], 6)
    assert a == pytest.approx(b, rel=1e-14)


def test_scaling_values_changes_only_the_laplace_term():
    hyper = PriorHyper(lam=0.7)
    a = neglog_prior_weights(5, 2, [2, 3], [0.5, -0.25], 6, hyper)
    b = neglog_prior_weights(5, 2, [2, 3], [1.5, -0.75], 6, hyper)
    assert b - a == pytest.approx(0.7 * (1.5 + 0.75 - 0.5 - 0.25))


def test_theta_prior_single_zero_category():
    hyper = PriorHyper(delta_theta=1e-8, lambda_theta=1.0)
    expected = math.log(4) - math.log(1 - math.exp(-1e-8))
    assert neglog_prior_theta(4, 1, [4], [0.0], hyper) == pytest.approx(expected, rel=1e-10)


def test_theta_prior_prefers_shared_values():
    shared = neglog_prior_theta(4, 1, [4], [0.5])
    distinct = neglog_prior_theta(4, 4, [1, 1, 1, 1], [0.5, 0.25, -0.25, 1.0])
    assert shared < distinct


def test_theta_prior_rejects_duplicates():
    with pytest.raises(CategoryError):
        neglog_prior_theta(4, 2, [2, 2], [0.5, 0.5])


def test_description_length_of_empty_state():
    data = Dataset(states=np.zeros((3, 0)), kind=DataKind.IID)
    state = ModelState(data, ModelKind.parse("equilibrium"))
    hyper = PriorHyper()
    expected = math.log(4) + neglog_prior_theta(3, 1, [3], [0.0], hyper)
    assert description_length(state) == pytest.approx(expected)


def test_report_recomputes_its_description_length():
    net = WeightedNetwork.from_edges(4, [(0, 1, 0.5), (1, 2, 0.5), (2, 3, -0.25)])
    fields = NodeFields(4, theta=[0.0, 0.1, 0.1, 0.0])
    data = Dataset(states=np.array([[1, -1, 1], [1, 1, -1], [-1, 1, 1], [1, 1, 1]]), kind=DataKind.IID)
    state = ModelState(data, ModelKind.parse("equilibrium"), net=net, fields=fields)
    report = RunReport(
        model="equilibrium",
        description_length=description_length(state),
        loglik=state.loglik(),
        prior_weights=prior_weights_of(4, net.categories),
        prior_theta=0.0,
        n_nodes=4,
        E=net.E,
        K=net.categories.K,
        categories=list(zip(net.categories.values, net.categories.counts)),
        theta_categories=list(zip(fields.categories.values, fields.categories.counts)),
    )
    assert recompute_description_length(report) == pytest.approx(report.description_length, abs=1e-6)


def test_optimize_lambda_lowers_the_prior():
    cats = WeightCategories(delta=1e-8, lam=1.0)
    net = WeightedNetwork(10, cats)
    for k, (i, j) in enumerate([(0, 1), (2, 3), (4, 5)]):
        net.set_entry(i, j, [4.0, 5.0, 6.0][k], create=True)
    before = prior_weights_of(10, cats)
    lam = optimize_lambda(10, cats)
    assert lam < 1.0
    assert prior_weights_of(10, cats) < before


# ============== DESCRIPTION LENGTH ORACLE ==============

def _lbinom(n, k):
    if n == k:
        return 0.0
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _counts(values):
    out = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return out


def _oracle_description_length(X, kind, W, theta, lam, delta, lam_t, delta_t):
    """-loglik + weight prior + field prior evaluated straight from the formulas"""
    N = X.shape[0]
    inputs, targets = (X[:, :-1], X[:, 1:]) if kind.kinetic else (X, X)
    S = W @ inputs + theta[:, None]
    norm = 1 + 2 * np.cosh(S) if kind.zero_valued else 2 * np.cosh(S)
    loglik = float(np.sum(targets * S - np.log(norm)))

    weights = _counts(W[i, j] for i in range(N) for j in range(i + 1, N) if W[i, j] != 0)
    E, K = sum(weights.values()), len(weights)
    P = N * (N - 1) // 2
    prior_w = (
        -sum(math.lgamma(m + 1) for m in weights.values())
        + math.lgamma(E + 1)
        + _lbinom(E - 1, K - 1)
        + sum(lam * abs(z) - math.log(math.expm1(lam * delta)) + math.log(2) for z in weights)
        + math.log(max(E, 1))
        + _lbinom(P, E)
        + math.log(P + 1)
    )

    fields = _counts(float(u) for u in theta)
    zero_mass = -math.log(1 - math.exp(-lam_t * delta_t))
    masses = [zero_mass if u == 0 else lam_t * abs(u) - math.log(math.sinh(lam_t * delta_t)) for u in fields]
    prior_t = (
        -sum(math.lgamma(n + 1) for n in fields.values())
        + math.lgamma(N + 1)
        + _lbinom(N - 1, len(fields) - 1)
        + math.log(N)
        + sum(masses)
    )
    return -loglik + prior_w + prior_t


@pytest.mark.parametrize("token", ["kinetic", "equilibrium", "kinetic-z", "equilibrium-z"])
def test_description_length_matches_direct_evaluation(token):
    kind = ModelKind.parse(token)
    rng = np.random.default_rng(sum(map(ord, token)))
    alphabet = Alphabet.ZERO_VALUED if kind.zero_valued else Alphabet.BINARY
    symbols = [-1, 0, 1] if kind.zero_valued else [-1, 1]
    for _ in range(50):
        N = int(rng.integers(2, 7))
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
        E = int(rng.integers(0, min(8, len(pairs)) + 1))
        K = int(rng.integers(1, min(3, E) + 1)) if E else 0
        values = rng.choice([-0.75, -0.5, -0.25, 0.25, 0.5, 1.0], size=K, replace=False)
        labels = np.concatenate([np.arange(K), rng.integers(0, max(K, 1), size=E - K)]).astype(int)
        chosen = rng.choice(len(pairs), size=E, replace=False)
        edges = [(*pairs[k], float(values[c])) for k, c in zip(chosen, labels)]
        theta = rng.choice([0.0, 0.25, -0.5, 1.0], size=N)
        M = int(rng.integers(1, 12))
        X = rng.choice(symbols, size=(N, M + 1 if kind.kinetic else M))
        data = Dataset(
            states=X,
            kind=DataKind.MARKOV if kind.kinetic else DataKind.IID,
            alphabet=alphabet,
        )
        net = WeightedNetwork.from_edges(N, edges, delta=0.25, lam=1.3)
        fields = NodeFields(N, delta_theta=0.25, lambda_theta=0.7, theta=theta)
        state = ModelState(data, kind, net=net, fields=fields)

        expected = _oracle_description_length(
            X.astype(float), kind, net.to_dense(), np.asarray(theta, dtype=float), 1.3, 0.25, 0.7, 0.25
        )
        assert description_length(state) == pytest.approx(expected, rel=1e-9)
