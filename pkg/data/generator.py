"""
Synthetic Network Generator
Planted weighted networks on benchmark graphs, for experiments and tests
Run this script to write a planted karate-club network and a kinetic sample
"""

from typing import List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from config import DATA_DIR
from data.errors import DataError
from data.network import NodeFields, WeightedNetwork

MEAN_INVERSE_DEGREE = "invk"

FOOTBALL_SIZE = (115, 613)


# ============== GRAPHS ==============

def karate_edges() -> Tuple[int, List[Tuple[int, int]]]:
    """Zachary karate club: 34 nodes, 78 edges, 0-based"""
    g = nx.karate_club_graph()
    return g.number_of_nodes(), sorted((min(u, v), max(u, v)) for u, v in g.edges())


def random_stand_in(n_nodes: int, n_edges: int, seed: Optional[int] = None) -> Tuple[int, List[Tuple[int, int]]]:
    """Uniform random graph with exactly n_edges edges (stand-in for graphs not shipped here)"""
    g = nx.gnm_random_graph(n_nodes, n_edges, seed=seed)
    return n_nodes, sorted((min(u, v), max(u, v)) for u, v in g.edges())


def football_stand_in(seed: Optional[int] = None) -> Tuple[int, List[Tuple[int, int]]]:
    return random_stand_in(*FOOTBALL_SIZE, seed=seed)


# ============== WEIGHTS ==============

def mean_weight(n_nodes: int, n_edges: int, mean_spec: Union[float, str]) -> float:
    """Literal mean, or 1/<k> = N / (2E) for the inverse-degree token"""
    if isinstance(mean_spec, str):
        if mean_spec != MEAN_INVERSE_DEGREE:
            return float(mean_spec)
        if n_edges == 0:
            raise DataError("Mean 1/<k> is undefined for an empty edge list")
        return n_nodes / (2.0 * n_edges)
    return float(mean_spec)


def plant_weights(
    edges: Sequence[Tuple[int, int]],
    mean_spec: Union[float, str],
    sigma: float,
    rng: Optional[np.random.Generator] = None,
    n_nodes: Optional[int] = None,
) -> WeightedNetwork:
    """I.i.d. normal weights on the given edges"""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    if n_nodes is None:
        n_nodes = max((max(i, j) for i, j in edges), default=-1) + 1
    mu = mean_weight(n_nodes, len(edges), mean_spec)
    weights = rng.normal(mu, sigma, size=len(edges)) if sigma > 0 else np.full(len(edges), mu)
    return WeightedNetwork.from_edges(n_nodes, ((i, j, w) for (i, j), w in zip(edges, weights)))


def two_clique_model(
    clique_size: int = 5,
    w_in: float = 0.25,
    w_bridge: float = 4.0,
    theta_clique: float = -1.0,
    theta_bridge: float = 2.0,
) -> Tuple[WeightedNetwork, NodeFields]:
    """
    Node 0 bridges two positive cliques. The default bridge coupling dominates
    the clique couplings: the present macrostate holds while node 0 is present
    and collapses once it is clamped off.
    """
    n = 1 + 2 * clique_size
    edges = []
    for start in (1, 1 + clique_size):
        members = range(start, start + clique_size)
        edges += [(0, i, w_bridge) for i in members]
        edges += [(i, j, w_in) for i in members for j in members if i < j]
    net = WeightedNetwork.from_edges(n, edges)
    fields = NodeFields(n, theta=[theta_bridge] + [theta_clique] * (2 * clique_size))
    return net, fields


if __name__ == "__main__":
    from data.schema import ModelKind
    from services.io_service import write_data_matrix, write_network
    from services.sampler_service import sample_kinetic

    # Set seed for reproducibility during development
    rng = np.random.default_rng(42)

    n, edges = karate_edges()
    net = plant_weights(edges, 0.22, 0.01, rng, n_nodes=n)
    fields = NodeFields(n)
    data = sample_kinetic(net, fields, 1000, "random", rng)

    write_network(DATA_DIR / "karate_planted.tsv", net, fields, model=ModelKind.parse("kinetic").token)
    write_data_matrix(DATA_DIR / "karate_kinetic.tsv", data)

    print("\n=== SUMMARY ===")
    print(f"Nodes: {n}, edges: {net.E}")
    print(f"Mean weight: {np.mean([w for _, _, w in net.edges()]):.4f}")
    print(f"Kinetic sample: {data.n_samples} states")
