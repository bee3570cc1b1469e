"""
Metrics Service
Weighted and binary Jaccard similarity between a true and an inferred network
"""

from typing import Dict, Tuple, Union

import numpy as np

from data.errors import DimensionMismatchError
from data.network import WeightedNetwork

NetworkLike = Union[WeightedNetwork, np.ndarray]


def _edge_map(net: NetworkLike) -> Tuple[int, Dict[Tuple[int, int], float]]:
    if isinstance(net, WeightedNetwork):
        return net.n_nodes, {(i, j): w for i, j, w in net.edges()}
    W = np.asarray(net, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {W.shape}")
    iu, ju = np.nonzero(np.triu(W, k=1))
    return W.shape[0], {(int(i), int(j)): float(W[i, j]) for i, j in zip(iu, ju)}


def _pair(W_true: NetworkLike, W_hat: NetworkLike):
    n_true, a = _edge_map(W_true)
    n_hat, b = _edge_map(W_hat)
    if n_true != n_hat:
        raise DimensionMismatchError(f"Networks have {n_true} and {n_hat} nodes")
    return a, b


def jaccard_weighted(W_true: NetworkLike, W_hat: NetworkLike) -> float:
    """1 - sum|W - W_hat| / sum(|W| + |W_hat|); 1 when both are empty"""
    a, b = _pair(W_true, W_hat)
    keys = set(a) | set(b)
    denom = sum(abs(a.get(k, 0.0)) + abs(b.get(k, 0.0)) for k in keys)
    if denom == 0:
        return 1.0
    num = sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
    return 1.0 - num / denom


def jaccard_binary(W_true: NetworkLike, W_hat: NetworkLike) -> float:
    """|E_true & E_hat| / |E_true | E_hat| over the binarized supports"""
    a, b = _pair(W_true, W_hat)
    union = set(a) | set(b)
    if not union:
        return 1.0
    return len(set(a) & set(b)) / len(union)


def evaluate(W_true: NetworkLike, W_hat: NetworkLike) -> Dict[str, float]:
    a, b = _pair(W_true, W_hat)
    return {
        "jaccard_weighted": jaccard_weighted(W_true, W_hat),
        "jaccard_binary": jaccard_binary(W_true, W_hat),
        "E_true": len(a),
        "E_hat": len(b),
    }
