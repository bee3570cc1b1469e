import numpy as np
import pytest

from data.errors import DimensionMismatchError
from data.network import WeightedNetwork
from services.metrics_service import evaluate, jaccard_binary, jaccard_weighted


def test_identical_networks_score_one(small_net):
    assert jaccard_weighted(small_net, small_net.copy()) == 1.0
    assert jaccard_binary(small_net, small_net.copy()) == 1.0


def test_two_empty_networks_score_one():
    assert jaccard_weighted(WeightedNetwork(3), WeightedNetwork(3)) == 1.0
    assert jaccard_binary(WeightedNetwork(3), WeightedNetwork(3)) == 1.0


def test_empty_against_nonempty_scores_zero(small_net):
    assert jaccard_weighted(small_net, WeightedNetwork(4)) == 0.0
    assert jaccard_binary(WeightedNetwork(4), small_net) == 0.0


def test_weighted_example():
    truth = WeightedNetwork.from_edges(3, [(0, 1, 1.0)])
    hat = WeightedNetwork.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert jaccard_weighted(truth, hat) == pytest.approx(2 / 3)
    assert jaccard_binary(truth, hat) == pytest.approx(1 / 2)


def test_binary_ignores_weights():
    truth = WeightedNetwork.from_edges(4, [(0, 1, 1.0), (1, 2, -2.0)])
    hat = WeightedNetwork.from_edges(4, [(1, 2, 0.1), (2, 3, 5.0)])
    assert jaccard_binary(truth, hat) == pytest.approx(1 / 3)


def test_metrics_are_symmetric(small_net):
    other = WeightedNetwork.from_edges(4, [(0, 1, 0.25), (0, 3, 1.0)])
    assert jaccard_weighted(small_net, other) == pytest.approx(jaccard_weighted(other, small_net))
    assert jaccard_binary(small_net, other) == pytest.approx(jaccard_binary(other, small_net))


def test_dense_matrices_are_accepted(small_net):
    assert jaccard_weighted(small_net.to_dense(), small_net) == pytest.approx(1.0)


def test_size_mismatch_raises(small_net):
    with pytest.raises(DimensionMismatchError):
        jaccard_weighted(small_net, WeightedNetwork(5))
    with pytest.raises(DimensionMismatchError):
        jaccard_binary(np.zeros((2, 3)), small_net)


def test_evaluate_summary(small_net):
    summary = evaluate(small_net, WeightedNetwork(4))
    assert summary == {"jaccard_weighted": 0.0, "jaccard_binary": 0.0, "E_true": 3, "E_hat": 0}
