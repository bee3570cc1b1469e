import numpy as np
import pytest

from data.errors import CategoryError, SelfLoopError, UnknownCategoryError
from data.network import NodeFields, WeightCategories, WeightedNetwork, pair_key, snap


def test_pair_key_orders_and_rejects_self_loops():
    assert pair_key(3, 1) == (1, 3)
    with pytest.raises(SelfLoopError):
        pair_key(2, 2)


def test_snap_rounds_half_to_even():
    assert snap(0.5, 1.0) == 0.0
    assert snap(1.5, 1.0) == 2.0
    assert snap(0.26, 0.1) == pytest.approx(0.3)


def test_set_entry_is_symmetric_and_tracks_categories():
    net = WeightedNetwork(4, WeightCategories(delta=1e-3))
    net.set_entry(2, 0, 0.5, create=True)
    net.set_entry(1, 3, 0.5)
    assert net.weight(0, 2) == net.weight(2, 0) == pytest.approx(0.5)
    assert net.E == 2
    assert net.categories.K == 1
    assert net.categories.counts == [2]
    net.check_invariants()


def test_new_value_without_create_is_rejected():
    net = WeightedNetwork(3)
    with pytest.raises(UnknownCategoryError):
        net.set_entry(0, 1, 0.5)


def test_clearing_last_member_drops_category():
    net = WeightedNetwork.from_edges(3, [(0, 1, 0.5), (1, 2, -0.2)], delta=1e-3)
    prev = net.set_entry(1, 2, 0.0)
    assert prev == pytest.approx(-0.2)
    assert net.categories.values == [pytest.approx(0.5)]
    assert net.E == 1
    net.check_invariants()


def test_zero_weight_category_is_invalid():
    cats = WeightCategories()
    with pytest.raises(CategoryError):
        cats.create(0.0)


def test_incremental_counts_match_recount_after_random_updates(rng):
    net = WeightedNetwork(6, WeightCategories(delta=0.25))
    grid = [-0.5, -0.25, 0.0, 0.25, 0.5, 0.75]
    for _ in range(200):
        i, j = rng.choice(6, size=2, replace=False)
        net.set_entry(int(i), int(j), grid[int(rng.integers(len(grid)))], create=True)
        net.check_invariants()
    recount = {}
    for _, _, w in net.edges():
        recount[w] = recount.get(w, 0) + 1
    assert recount == dict(zip(net.categories.values, net.categories.counts))


def test_binarize_examples():
    assert WeightedNetwork(4).binarize() == frozenset()
    net = WeightedNetwork.from_edges(4, [(1, 2, 0.5), (2, 3, -0.1)], delta=1e-3)
    mask = net.binarize()
    assert mask == {(1, 2), (2, 3)}
    assert WeightedNetwork.from_mask(4, mask).binarize() == mask


def test_relabel_category_merges_into_existing_value(small_net):
    moved = small_net.relabel_category(small_net.categories.values[0], 0.5)
    assert moved == [(2, 3)]
    assert small_net.categories.K == 1
    assert small_net.categories.counts == [3]
    small_net.check_invariants()


def test_dense_and_sparse_views_agree(small_net):
    dense = small_net.to_dense()
    assert np.allclose(dense, dense.T)
    assert np.allclose(small_net.to_sparse().toarray(), dense)
    assert small_net.degrees() == [1, 2, 2, 1]


def test_copy_is_independent(small_net):
    other = small_net.copy()
    other.set_entry(0, 1, 0.0)
    assert small_net.weight(0, 1) == pytest.approx(0.5)
    assert other.E == small_net.E - 1


def test_preview_does_not_mutate(small_net):
    cats = small_net.categories
    before = cats.stats()
    after = cats.preview({cats.values[1]: -2, 0.75: 1})
    assert cats.stats() == before
    assert after.total == before.total - 1
    assert after.n_categories == before.n_categories


def test_node_fields_keep_every_node_in_a_category():
    fields = NodeFields(4, delta_theta=1e-3)
    assert fields.categories.values == [0.0]
    assert fields.categories.counts == [4]
    fields.set_value(2, 0.3)
    value = fields.value(2)
    assert value == pytest.approx(0.3)
    assert fields.categories.counts == [3, 1]
    assert fields.members(value) == [2]
    fields.relabel_category(value, 0.0)
    assert fields.categories.K == 1
    fields.check_invariants()


def test_node_fields_theta_is_read_only(small_fields):
    with pytest.raises(ValueError):
        small_fields.theta[0] = 1.0


def test_node_fields_reject_wrong_length():
    with pytest.raises(CategoryError):
        NodeFields(3, theta=[0.0, 1.0])
