import numpy as np
import pytest

from data.network import WeightCategories, WeightedNetwork
from data.schema import Dataset, DataKind, ModelKind
from services.candidate_service import (
    PairScorer,
    candidate_search_exact,
    candidate_search_nnd,
    score_pair,
)
from services.likelihood_service import ModelState
from services.prior_service import description_length

EQUILIBRIUM = ModelKind.parse("equilibrium")


def _state(rng, n_nodes=5, n_samples=40, edges=()):
    data = Dataset(states=rng.choice([-1, 1], size=(n_nodes, n_samples)), kind=DataKind.IID)
    net = WeightedNetwork(n_nodes, WeightCategories(delta=1e-3))
    for i, j, w in edges:
        net.set_entry(i, j, w, create=True)
    return ModelState(data, EQUILIBRIUM, net=net)


def _brute_score(state, i, j):
    """max over the two insertion values of -DL after inserting (i, j)"""
    cats = state.net.categories
    positive = [v for v in cats.values if v > 0]
    negative = [v for v in cats.values if v < 0]
    options = {min(positive) if positive else max(negative), max(negative) if negative else min(positive)}
    best = -np.inf
    for w in options:
        state.apply_entry(i, j, w)
        best = max(best, -description_length(state))
        state.apply_entry(i, j, 0.0)
    return best


def test_gradient_fallback_without_categories():
    states = np.array([[1, -1, 1, -1], [1, 1, -1, -1], [1, 1, 1, 1]])
    state = ModelState(Dataset(states=states, kind=DataKind.IID), EQUILIBRIUM)
    # nodes 0 and 1 are uncorrelated
    assert score_pair(state, 0, 1) == pytest.approx(0.0)
    assert score_pair(state, 0, 2) == pytest.approx(abs(state.grad_entry(0, 2)))


def test_score_of_improving_insertion_beats_current_posterior(rng):
    n = 4
    x = rng.choice([-1, 1], size=(1, 200))
    states = np.vstack([x, x, rng.choice([-1, 1], size=(2, 200))])
    net = WeightedNetwork(n, WeightCategories(delta=1e-3))
    net.set_entry(2, 3, 0.5, create=True)
    state = ModelState(Dataset(states=states, kind=DataKind.IID), EQUILIBRIUM, net=net)
    assert score_pair(state, 0, 1) > -description_length(state)


def test_scores_match_brute_force_recomputation(rng):
    state = _state(rng, edges=[(0, 1, 0.5), (2, 3, -0.25)])
    scorer = PairScorer(state)
    matrix = scorer.score_matrix()
    for i, j in [(0, 2), (1, 4), (3, 4), (0, 4)]:
        expected = _brute_score(state, i, j)
        assert scorer.score(i, j) == pytest.approx(expected, rel=1e-9)
        assert matrix[i, j] == pytest.approx(expected, rel=1e-9)
        assert matrix[j, i] == pytest.approx(expected, rel=1e-9)


def test_single_sign_categories_use_that_sign(rng):
    state = _state(rng, edges=[(0, 1, 0.5), (1, 2, 0.75)])
    scorer = PairScorer(state)
    assert [w for w, _ in scorer.branches] == [pytest.approx(0.5)]


def test_exact_search_matches_sort_oracle(rng):
    state = _state(rng, n_nodes=4, edges=[(0, 1, 0.5)])
    cands = candidate_search_exact(state, kappa=1.0)
    scorer = PairScorer(state)
    zero = [(i, j) for i in range(4) for j in range(i + 1, 4) if (i, j) != (0, 1)]
    oracle = sorted(zero, key=lambda p: (-scorer.score(*p), p))[:4]
    assert cands.zero_pairs == oracle
    assert cands.nonzero_pairs == [(0, 1)]
    assert len(set(cands.pairs)) == len(cands.pairs)


def test_large_kappa_returns_every_pair(rng):
    state = _state(rng, n_nodes=4)
    cands = candidate_search_exact(state, kappa=10.0)
    assert sorted(cands.pairs) == [(i, j) for i in range(4) for j in range(i + 1, 4)]


def test_threaded_scoring_matches_serial(rng):
    state = _state(rng, n_nodes=7, edges=[(0, 1, 0.5)])
    scorer = PairScorer(state)
    assert np.allclose(scorer.score_matrix(threads=3), scorer.score_matrix(threads=1))


def test_single_node_has_no_candidates(rng):
    state = _state(rng, n_nodes=1)
    assert len(candidate_search_exact(state, 1.0)) == 0
    assert len(candidate_search_nnd(state, 1.0, rng=rng)) == 0


def test_nnd_is_deterministic_under_a_seed(rng):
    state = _state(rng, n_nodes=12, edges=[(0, 1, 0.5)])
    a = candidate_search_nnd(state, 1.0, rng=np.random.default_rng(3))
    b = candidate_search_nnd(state, 1.0, rng=np.random.default_rng(3))
    assert a.pairs == b.pairs


def test_nnd_recall_against_exact_search():
    recalls = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.choice([-1, 1], size=(6, 300))
        noise = rng.choice([-1, 1], size=(30, 300))
        states = np.vstack([x, x * np.where(rng.random((6, 300)) < 0.9, 1, -1), noise])
        state = ModelState(Dataset(states=states, kind=DataKind.IID), EQUILIBRIUM)
        exact = set(candidate_search_exact(state, 1.0).zero_pairs)
        approx = set(candidate_search_nnd(state, 1.0, rounds=10, rng=rng).zero_pairs)
        recalls.append(len(exact & approx) / len(exact))
    assert np.mean(recalls) >= 0.8


def test_score_pair_rejects_present_entries(rng):
    state = _state(rng, edges=[(0, 1, 0.5)])
    with pytest.raises(ValueError):
        score_pair(state, 0, 1)


def test_complete_graph_has_no_insertion_candidates(rng):
    state = _state(rng, n_nodes=3, edges=[(0, 1, 0.5), (0, 2, 0.5), (1, 2, -0.25)])
    scorer = PairScorer(state)
    assert np.all(scorer.score_matrix() == -np.inf)
    for search in (candidate_search_exact, lambda st, k: candidate_search_nnd(st, k, rng=rng)):
        cands = search(state, 2.0)
        assert cands.zero_pairs == []
        assert sorted(cands.nonzero_pairs) == [(0, 1), (0, 2), (1, 2)]
