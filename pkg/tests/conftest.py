"""
Shared fixtures for the mdlnr test suite.
Full-scale reproduction runs are marked slow and need --runslow.
"""

import numpy as np
import pytest

from data.network import NodeFields, WeightedNetwork
from data.schema import Dataset, DataKind


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reproduction tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale reproduction test (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_net():
    """Four nodes, three edges over two weight values"""
    return WeightedNetwork.from_edges(4, [(0, 1, 0.5), (1, 2, 0.5), (2, 3, -0.25)], delta=1e-3)


@pytest.fixture
def small_fields():
    return NodeFields(4, delta_theta=1e-3, theta=[0.0, 0.1, -0.1, 0.0])


@pytest.fixture
def iid_data(rng):
    return Dataset(states=rng.choice([-1, 1], size=(4, 30)), kind=DataKind.IID)


@pytest.fixture
def markov_data(rng):
    return Dataset(states=rng.choice([-1, 1], size=(4, 31)), kind=DataKind.MARKOV)
