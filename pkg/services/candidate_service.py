"""
Candidate Service
Ranks absent entries of W by the log-posterior of inserting them and builds the
candidate set of the optimizer (exact all-pairs scoring or neighbor-descent search)
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from data.network import Pair, pair_key
from services.likelihood_service import ModelState, local_mean, log_partition
from services.prior_service import description_length, neglog_prior_weights_from_stats

logger = logging.getLogger(__name__)

NND_MIN_UPDATE_FRACTION = 0.01


@dataclass
class CandidateSet:
    """Zero-valued candidate pairs plus every currently nonzero pair"""
    zero_pairs: List[Pair] = field(default_factory=list)
    nonzero_pairs: List[Pair] = field(default_factory=list)
    scores: Dict[Pair, float] = field(default_factory=dict)

    @property
    def pairs(self) -> List[Pair]:
        return self.zero_pairs + self.nonzero_pairs

    def __len__(self) -> int:
        return len(self.zero_pairs) + len(self.nonzero_pairs)


# ============== PAIR SCORING ==============

class PairScorer:
    """
    Scores absent pairs by the log-posterior after inserting the smallest-magnitude
    positive or negative category value, whichever is better.
    With no categories the score is the gradient magnitude.
    """

    def __init__(self, state: ModelState):
        self.state = state
        cats = state.net.categories
        values = cats.values
        positive = [v for v in values if v > 0]
        negative = [v for v in values if v < 0]
        self.use_gradient = not values
        self.branches: List[Tuple[float, float]] = []
        # a complete graph has no absent pair left to insert
        self.saturated = state.net.E >= n_pairs(state.n_nodes)
        if self.saturated:
            self.use_gradient = False
            self.log_posterior = -math.inf
            return
        if self.use_gradient:
            self.log_posterior = 0.0
            return
        w_pos = min(positive) if positive else max(negative)
        w_neg = max(negative) if negative else min(positive)
        self.log_posterior = -description_length(state)
        N = state.n_nodes
        base = neglog_prior_weights_from_stats(N, cats.stats(), cats.lam, cats.delta)
        for w in sorted({w_pos, w_neg}):
            after = neglog_prior_weights_from_stats(N, cats.preview({w: 1}), cats.lam, cats.delta)
            self.branches.append((w, after - base))

    def score(self, i: int, j: int) -> float:
        if self.saturated:
            return -math.inf
        if self.use_gradient:
            return abs(self.state.grad_entry(i, j))
        return self.log_posterior + max(
            self.state.delta_loglik_edge(i, j, w) - dprior for w, dprior in self.branches
        )

    def _insertion_gain(self, w: float, rows: slice) -> np.ndarray:
        """F[i, j] = loglik change of the conditionals of i in rows when W_ij goes 0 -> w"""
        st = self.state
        S = st.S[rows]
        z0 = log_partition(S, st.zero_valued)
        P = log_partition(S + w, st.zero_valued) - z0
        Q = log_partition(S - w, st.zero_valued) - z0
        plus = (st.inputs == 1).astype(float)
        minus = (st.inputs == -1).astype(float)
        return w * (st.targets[rows] @ st.inputs.T) - (P @ plus.T + Q @ minus.T)

    def score_matrix(self, threads: int = 1) -> np.ndarray:
        """Scores of all pairs as if each were absent (dense N x N, -inf diagonal)"""
        st = self.state
        N = st.n_nodes
        if self.saturated:
            return np.full((N, N), -np.inf)
        step = max(1, math.ceil(N / threads))
        chunks = [slice(a, min(a + step, N)) for a in range(0, N, step)]

        def run(fn):
            if threads > 1 and len(chunks) > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    return np.vstack(list(pool.map(fn, chunks)))
            return np.vstack([fn(c) for c in chunks]) if chunks else np.zeros((0, 0))

        if self.use_gradient:
            resid = st.targets - local_mean(st.S, st.zero_valued)
            G = run(lambda rows: resid[rows] @ st.inputs.T)
            out = np.abs(G + G.T)
        else:
            best = None
            for w, dprior in self.branches:
                F = run(lambda rows: self._insertion_gain(w, rows))
                gain = F + F.T - dprior
                best = gain if best is None else np.maximum(best, gain)
            out = self.log_posterior + best
        np.fill_diagonal(out, -np.inf)
        return out


def score_pair(state: ModelState, i: int, j: int) -> float:
    """Ranking score of inserting the absent pair (i, j)"""
    pair_key(i, j)
    if state.net.weight(i, j) != 0:
        raise ValueError(f"Pair ({i}, {j}) is already nonzero")
    return PairScorer(state).score(i, j)


def n_pairs(n_nodes: int) -> int:
    return n_nodes * (n_nodes - 1) // 2


def _n_candidates(n_nodes: int, kappa: float) -> int:
    return int(math.ceil(kappa * n_nodes))


# ============== EXACT SEARCH ==============

def candidate_search_exact(state: ModelState, kappa: float, threads: int = 1) -> CandidateSet:
    """Top ceil(kappa N) absent pairs by score, plus the nonzero pairs"""
    N = state.n_nodes
    nonzero = state.net.pairs()
    if len(nonzero) >= n_pairs(N):
        return CandidateSet(nonzero_pairs=nonzero)
    scores = PairScorer(state).score_matrix(threads)
    iu, ju = np.triu_indices(N, k=1)
    flat = scores[iu, ju]
    if nonzero:
        rows, cols = zip(*nonzero)
        mask = np.zeros((N, N), dtype=bool)
        mask[list(rows), list(cols)] = True
        flat = np.where(mask[iu, ju], -np.inf, flat)
    n_zero = len(flat) - len(nonzero)
    n_keep = min(_n_candidates(N, kappa), n_zero)
    if n_keep <= 0:
        return CandidateSet(nonzero_pairs=nonzero)
    # stable ordering: score descending, then pair index
    order = np.lexsort((np.arange(len(flat)), -flat))[:n_keep]
    zero_pairs = [(int(iu[k]), int(ju[k])) for k in order]
    return CandidateSet(
        zero_pairs=zero_pairs,
        nonzero_pairs=nonzero,
        scores={p: float(flat[k]) for p, k in zip(zero_pairs, order)},
    )


# ============== NEIGHBOR-DESCENT SEARCH ==============

class _CandidateLists:
    """Per-node bounded lists of the best-scored partners"""

    def __init__(self, n_nodes: int, length: int):
        self.length = length
        self.items: List[Dict[int, float]] = [dict() for _ in range(n_nodes)]

    def offer(self, i: int, j: int, score: float) -> bool:
        lst = self.items[i]
        if j in lst:
            return False
        if len(lst) < self.length:
            lst[j] = score
            return True
        worst = min(lst, key=lambda k: (lst[k], -k))
        if score > lst[worst]:
            del lst[worst]
            lst[j] = score
            return True
        return False


def candidate_search_nnd(
    state: ModelState,
    kappa: float,
    rounds: int = 10,
    list_length: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> CandidateSet:
    """
    Approximate top ceil(kappa N) absent pairs by stochastic second-neighbor search.
    Each node keeps a list of its best-scored partners; every round scores the
    neighbors of neighbors in the candidate graph plus random pairs.
    """
    rng = rng if rng is not None else np.random.default_rng()
    N = state.n_nodes
    nonzero = state.net.pairs()
    if len(nonzero) >= n_pairs(N):
        return CandidateSet(nonzero_pairs=nonzero)
    L = min(list_length or int(2 * kappa + 8), N - 1)
    scorer = PairScorer(state)
    lists = _CandidateLists(N, L)
    scored: Dict[Pair, float] = {}

    def consider(i: int, j: int) -> int:
        if i == j or state.net.weight(i, j) != 0:
            return 0
        key = pair_key(i, j)
        if key not in scored:
            scored[key] = scorer.score(*key)
        s = scored[key]
        return int(lists.offer(i, j, s)) + int(lists.offer(j, i, s))

    for i in range(N):
        for j in rng.choice(N - 1, size=L, replace=False):
            consider(i, int(j) + (j >= i))

    for r in range(rounds):
        updates = 0
        for i in range(N):
            graph: Set[int] = set(lists.items[i]) | set(state.net.neighbors(i))
            for j in sorted(graph):
                partners = set(lists.items[j]) | set(state.net.neighbors(j))
                for k in sorted(partners):
                    updates += consider(i, k)
            j = int(rng.integers(N - 1))
            updates += consider(i, j + (j >= i))
        frac = updates / max(1, N * L)
        logger.debug("neighbor descent round %d: %d list updates (%.3f)", r + 1, updates, frac)
        if frac < NND_MIN_UPDATE_FRACTION:
            break

    ranked = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
    ranked = [(p, s) for p, s in ranked if state.net.weight(*p) == 0][: _n_candidates(N, kappa)]
    return CandidateSet(
        zero_pairs=[p for p, _ in ranked],
        nonzero_pairs=nonzero,
        scores=dict(ranked),
    )
