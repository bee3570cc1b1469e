"""
Inference Service
MDL network reconstruction: candidate search, edge updates, moves and swaps,
category value optimization and merge-split clustering of weights and node fields
"""

import logging
import math
import time
import warnings
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from data.errors import ConvergenceWarning
from data.network import NodeFields, WeightCategories, WeightedNetwork
from data.schema import CandidateMode, Dataset, ModelKind, OptimizerConfig, PriorHyper, RunReport, SweepOrder
from services.bisection import random_bisection, random_bisection_index
from services.candidate_service import CandidateSet, candidate_search_exact, candidate_search_nnd
from services.likelihood_service import ModelState
from services.prior_service import (
    description_length,
    neglog_prior_theta_from_stats,
    neglog_prior_weights_from_stats,
    optimize_lambda,
    prior_theta_of,
    prior_weights_of,
)

logger = logging.getLogger(__name__)

# numerical floor of a strict improvement (nats)
ACCEPT_EPS = 1e-9
MAX_SPLIT_ITERS = 20

MOVE_NAMES = (
    "edge_update",
    "edge_move",
    "edge_swap",
    "category_value",
    "merge_split",
    "theta_update",
    "theta_category_value",
    "theta_merge_split",
)


# ============== CATEGORY TARGETS ==============

class _Target:
    """
    A set of keyed parameters sharing one category set: edge weights or node fields.
    The category sweeps are written once against this interface.
    """

    allow_zero = False

    def __init__(self, state: ModelState, bound: float):
        self.state = state
        self.lo, self.hi = -bound, bound

    @property
    def categories(self) -> WeightCategories:
        raise NotImplementedError

    def value(self, key: Hashable) -> float:
        raise NotImplementedError

    def members(self, value: float) -> List[Hashable]:
        raise NotImplementedError

    def _delta_loglik(self, changes: Dict[Hashable, float]) -> float:
        raise NotImplementedError

    def _prior(self, stats) -> float:
        raise NotImplementedError

    def apply(self, changes: Dict[Hashable, float]) -> None:
        raise NotImplementedError

    def snap(self, x: float) -> float:
        return self.categories.snap(x)

    def admissible(self, v: float) -> bool:
        return self.allow_zero or v != 0

    def delta_dl(self, changes: Dict[Hashable, float]) -> float:
        """Description-length change of setting each key to its new value"""
        counts: Dict[float, int] = {}
        for key, new in changes.items():
            old = self.value(key)
            if old == new:
                continue
            if self.admissible(old):
                counts[old] = counts.get(old, 0) - 1
            if self.admissible(new):
                counts[new] = counts.get(new, 0) + 1
        if not counts:
            return 0.0
        cats = self.categories
        d_prior = self._prior(cats.preview(counts)) - self._prior(cats.stats())
        return d_prior - self._delta_loglik(changes)


class EdgeTarget(_Target):
    def __init__(self, state: ModelState, bound: float):
        super().__init__(state, bound)
        self.net = state.net

    @property
    def categories(self) -> WeightCategories:
        return self.net.categories

    def value(self, key):
        return self.net.weight(*key)

    def members(self, value):
        return self.net.members(value)

    def _delta_loglik(self, changes):
        return self.state.delta_loglik_edges([(i, j, w) for (i, j), w in changes.items()])

    def _prior(self, stats):
        cats = self.categories
        return neglog_prior_weights_from_stats(self.state.n_nodes, stats, cats.lam, cats.delta)

    def apply(self, changes):
        self.state.apply_entries([(i, j, w) for (i, j), w in changes.items()], create=True)


class FieldTarget(_Target):
    allow_zero = True

    def __init__(self, state: ModelState, bound: float):
        super().__init__(state, bound)
        self.fields = state.fields

    @property
    def categories(self) -> WeightCategories:
        return self.fields.categories

    def value(self, key):
        return self.fields.value(key)

    def members(self, value):
        return self.fields.members(value)

    def _delta_loglik(self, changes):
        return self.state.delta_loglik_theta(changes)

    def _prior(self, stats):
        cats = self.categories
        return neglog_prior_theta_from_stats(self.state.n_nodes, stats, cats.lam, cats.delta)

    def apply(self, changes):
        self.state.apply_thetas(changes)


# ============== OPTIMIZER ==============

class MDLReconstructor:
    """
    Greedy minimizer of the description length.
    Every move is evaluated as a DL delta and applied only if it strictly decreases DL.
    """

    def __init__(
        self,
        state: ModelState,
        cfg: Optional[OptimizerConfig] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.state = state
        self.cfg = cfg or OptimizerConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.cfg.seed)
        self.edges = EdgeTarget(state, self.cfg.weight_range)
        self.thetas = FieldTarget(state, self.cfg.theta_range)
        self.dl = description_length(state)
        self.acceptance: Dict[str, int] = {name: 0 for name in MOVE_NAMES}

    # ---------- helpers ----------

    def _order(self, items: Sequence) -> List:
        items = list(items)
        if self.cfg.sweep_order == SweepOrder.SHUFFLED and items:
            return [items[k] for k in self.rng.permutation(len(items))]
        return items

    def _commit(self, target: _Target, changes: Dict[Hashable, float], delta: float) -> None:
        target.apply(changes)
        self.dl += delta

    def _try(self, target: _Target, changes: Dict[Hashable, float]) -> bool:
        delta = target.delta_dl(changes)
        if delta < -ACCEPT_EPS:
            self._commit(target, changes, delta)
            return True
        logger.debug("rejected %s (dDL=%.3g)", changes, delta)
        return False

    def _value_search(
        self,
        target: _Target,
        keys: Sequence[Hashable],
        x0: Optional[float],
        lo: Optional[float] = None,
        hi: Optional[float] = None,
        forbidden: frozenset = frozenset(),
    ) -> Tuple[float, float]:
        """Random bisection over a common new value for keys; returns (value, -dDL)"""

        def objective(x: float) -> float:
            v = target.snap(x)
            if v in forbidden or not target.admissible(v):
                return -math.inf
            return -target.delta_dl({k: v for k in keys})

        lo = target.lo if lo is None else lo
        hi = target.hi if hi is None else hi
        if not lo < hi:
            return (x0 if x0 is not None else lo), -math.inf
        x, f = random_bisection(objective, lo, hi, self.cfg.bisection_iters, self.rng, x0=x0)
        v = target.snap(x)
        if f > ACCEPT_EPS and (abs(v - target.lo) < 1e-6 or abs(v - target.hi) < 1e-6):
            logger.warning("Bisection solution %.6g sits at the interval boundary", v)
        return v, f

    # ---------- per-key updates ----------

    def _update_key(self, target: _Target, key: Hashable, option: int) -> bool:
        cur = target.value(key)
        values = target.categories.values
        if option == 0 and values:
            start = values.index(cur) if cur in values else None
            k, f = random_bisection_index(
                lambda k: -target.delta_dl({key: values[k]}),
                len(values),
                self.rng,
                iters=self.cfg.bisection_iters,
                start=start,
            )
            new = values[k]
        elif option == 2 and not target.allow_zero:
            if cur == 0:
                return False
            new = 0.0
            f = -target.delta_dl({key: new})
        else:
            # fresh values only; option 0 covers the existing ones
            taken = frozenset(v for v in values if v != cur)
            new, f = self._value_search(target, [key], x0=cur if cur != 0 else None, forbidden=taken)
        if f > ACCEPT_EPS and new != cur:
            self._commit(target, {key: new}, -f)
            return True
        return False

    def edge_update_sweep(self, cands: CandidateSet) -> int:
        """Visit each candidate pair once with a uniformly chosen proposal (no zeroing of absent pairs)"""
        accepted = 0
        for key in self._order(cands.pairs):
            n_options = 3 if self.state.net.weight(*key) != 0 else 2
            accepted += self._update_key(self.edges, key, int(self.rng.integers(n_options)))
        return accepted

    def theta_update_sweep(self) -> int:
        """Per-node field update: best existing category or a new value"""
        accepted = 0
        for i in self._order(range(self.state.n_nodes)):
            accepted += self._update_key(self.thetas, i, int(self.rng.integers(2)))
        return accepted

    # ---------- edge moves and swaps ----------

    def edge_move_sweep(self, cands: CandidateSet) -> int:
        """Relocate a random incident edge of each node onto an absent candidate entry"""
        net = self.state.net
        partners: Dict[int, List[int]] = {}
        for i, j in cands.pairs:
            partners.setdefault(i, []).append(j)
            partners.setdefault(j, []).append(i)
        accepted = 0
        nodes = [i for i in range(net.n_nodes) if net.degree(i) > 0]
        for i in self._order(nodes):
            incident = sorted(net.neighbors(i))
            if not incident:
                continue
            free = [u for u in partners.get(i, ()) if net.weight(i, u) == 0]
            if not free:
                continue
            j = incident[int(self.rng.integers(len(incident)))]
            u = free[int(self.rng.integers(len(free)))]
            w = net.weight(i, j)
            accepted += self._try(self.edges, {(min(i, j), max(i, j)): 0.0, (min(i, u), max(i, u)): w})
        return accepted

    def edge_swap_sweep(self, n_proposals: Optional[int] = None) -> int:
        """
        Endpoint swaps (i,j),(u,v) -> (i,v),(u,j) onto absent entries.
        Preserves E, the category counts and the degree sequence.
        """
        net = self.state.net
        pairs = net.pairs()
        if len(pairs) < 2:
            return 0
        n_proposals = len(pairs) if n_proposals is None else n_proposals
        accepted = 0
        for _ in range(n_proposals):
            a, b = self.rng.choice(len(pairs), size=2, replace=False)
            (i, j), (u, v) = pairs[a], pairs[b]
            if self.rng.random() < 0.5:
                i, j = j, i
            if self.rng.random() < 0.5:
                u, v = v, u
            if len({i, j, u, v}) < 4:
                continue
            w_ij, w_uv = net.weight(i, j), net.weight(u, v)
            if w_ij == 0 or w_uv == 0 or net.weight(i, v) != 0 or net.weight(u, j) != 0:
                continue
            changes = {
                (min(i, j), max(i, j)): 0.0,
                (min(u, v), max(u, v)): 0.0,
                (min(i, v), max(i, v)): w_ij,
                (min(u, j), max(u, j)): w_uv,
            }
            if self._try(self.edges, changes):
                accepted += 1
                pairs = net.pairs()
        return accepted

    # ---------- category values ----------

    def _category_value_sweep(self, target: _Target) -> int:
        accepted = 0
        for value in self._order(target.categories.values):
            if value not in target.categories:
                continue
            keys = target.members(value)
            forbidden = frozenset(target.categories.values) - {value}
            new, f = self._value_search(target, keys, x0=value, forbidden=forbidden)
            if f > ACCEPT_EPS and new != value:
                self._commit(target, {k: new for k in keys}, -f)
                accepted += 1
        return accepted

    def category_value_sweep(self) -> int:
        """Bisection over each weight category value with assignments held fixed"""
        return self._category_value_sweep(self.edges)

    def theta_category_value_sweep(self) -> int:
        return self._category_value_sweep(self.thetas)

    # ---------- merge-split ----------

    def _sample_fresh(self, target: _Target, lo: float, hi: float, forbidden: frozenset) -> Optional[float]:
        for _ in range(20):
            v = target.snap(self.rng.uniform(lo, hi))
            if v not in forbidden and target.admissible(v):
                return v
        return None

    def _split_into_two(self, target: _Target, keys: List[Hashable], lo: float, hi: float) -> Optional[float]:
        """
        Redistribute keys over two new category values seeded uniformly in [lo, hi],
        then alternate member reassignment and value bisection until nothing changes.
        Applies the result and returns the accumulated DL change.
        """
        involved = {target.value(k) for k in keys}
        forbidden = frozenset(target.categories.values) - involved
        va = self._sample_fresh(target, lo, hi, forbidden)
        vb = self._sample_fresh(target, lo, hi, forbidden | {va})
        if va is None or vb is None or va == vb:
            return None
        vals = [va, vb]
        assign = self.rng.integers(2, size=len(keys))
        if assign.min() == assign.max():
            assign[int(self.rng.integers(len(keys)))] ^= 1
        changes = {k: vals[a] for k, a in zip(keys, assign)}
        total = target.delta_dl(changes)
        self._commit(target, changes, total)
        sizes = [int(np.sum(assign == 0)), int(np.sum(assign == 1))]

        for _ in range(MAX_SPLIT_ITERS):
            changed = False
            for idx in self.rng.permutation(len(keys)):
                cur = int(assign[idx])
                if sizes[cur] == 1:
                    continue
                move = {keys[idx]: vals[1 - cur]}
                delta = target.delta_dl(move)
                if delta < -ACCEPT_EPS:
                    self._commit(target, move, delta)
                    total += delta
                    assign[idx] = 1 - cur
                    sizes[cur] -= 1
                    sizes[1 - cur] += 1
                    changed = True
            for c in (0, 1):
                group = [k for k, a in zip(keys, assign) if a == c]
                new, f = self._value_search(
                    target, group, x0=vals[c], lo=lo, hi=hi, forbidden=forbidden | {vals[1 - c]}
                )
                if f > ACCEPT_EPS and new != vals[c]:
                    self._commit(target, {k: new for k in group}, -f)
                    total -= f
                    vals[c] = new
                    changed = True
            if not changed:
                break
        return total

    def _neighbors_range(self, target: _Target, lo_idx: int, hi_idx: int) -> Tuple[float, float]:
        values = target.categories.values
        lo = values[lo_idx - 1] if lo_idx > 0 else target.lo
        hi = values[hi_idx + 1] if hi_idx + 1 < len(values) else target.hi
        return lo, hi

    def _tentative(self, target: _Target, keys: List[Hashable], lo: float, hi: float) -> bool:
        """Split keys into two categories; keep the result only if DL strictly decreased"""
        original = {k: target.value(k) for k in keys}
        dl_before = self.dl
        total = self._split_into_two(target, keys, lo, hi)
        if total is None:
            return False
        if total < -ACCEPT_EPS:
            return True
        target.apply(original)
        self.dl = dl_before
        return False

    def _merge(self, target: _Target, k: int, l: int) -> bool:
        values = target.categories.values
        zk, zl = values[k], values[l]
        keys = target.members(zk) + target.members(zl)
        forbidden = frozenset(values) - {zk, zl}
        x0 = zk if target.categories.count(zk) >= target.categories.count(zl) else zl
        new, f = self._value_search(target, keys, x0=x0, forbidden=forbidden)
        if f > ACCEPT_EPS:
            self._commit(target, {key: new for key in keys}, -f)
            return True
        return False

    def _merge_split_sweep(self, target: _Target) -> int:
        accepted = 0
        for _ in range(max(1, target.categories.K)):
            values = target.categories.values
            K = len(values)
            splittable = [k for k, v in enumerate(values) if target.categories.count(v) >= 2]
            moves = []
            if K >= 2:
                moves += ["merge", "merge_split"]
            if splittable:
                moves.append("split")
            if not moves:
                break
            move = moves[int(self.rng.integers(len(moves)))]
            if move == "split":
                m = splittable[int(self.rng.integers(len(splittable)))]
                lo, hi = self._neighbors_range(target, m, m)
                ok = self._tentative(target, target.members(values[m]), lo, hi)
            else:
                k, l = sorted(int(x) for x in self.rng.choice(K, size=2, replace=False))
                if move == "merge":
                    ok = self._merge(target, k, l)
                else:
                    keys = target.members(values[k]) + target.members(values[l])
                    lo, hi = self._neighbors_range(target, k, l)
                    ok = self._tentative(target, keys, lo, hi)
            if ok:
                logger.debug("%s accepted (DL=%.6f)", move, self.dl)
            accepted += ok
        return accepted

    def merge_split_sweep(self) -> int:
        """Merge, split and merge-split proposals on the weight categories"""
        return self._merge_split_sweep(self.edges)

    def theta_merge_split_sweep(self) -> int:
        return self._merge_split_sweep(self.thetas)

    # ---------- driver ----------

    def candidate_search(self) -> CandidateSet:
        if self.cfg.candidate_mode == CandidateMode.NND:
            return candidate_search_nnd(
                self.state, self.cfg.kappa, self.cfg.nnd_rounds, self.cfg.list_length, self.rng
            )
        return candidate_search_exact(self.state, self.cfg.kappa, self.cfg.threads)

    def check(self) -> None:
        self.state.net.check_invariants()
        self.state.fields.check_invariants()
        err = self.state.cache_error()
        if err > 1e-9:
            raise AssertionError(f"Local-field cache drifted by {err:.3g}")

    def run_round(self) -> float:
        """One candidate search followed by every sweep type; returns the recomputed DL"""
        cands = self.candidate_search()
        sweeps: List[Tuple[str, Callable[[], int]]] = [
            ("edge_update", lambda: self.edge_update_sweep(cands)),
            ("edge_move", lambda: self.edge_move_sweep(cands)),
            ("edge_swap", lambda: self.edge_swap_sweep(self.cfg.swap_proposals)),
            ("category_value", self.category_value_sweep),
            ("merge_split", self.merge_split_sweep),
            ("theta_update", self.theta_update_sweep),
            ("theta_category_value", self.theta_category_value_sweep),
            ("theta_merge_split", self.theta_merge_split_sweep),
        ]
        for name, sweep in self._order(sweeps):
            self.acceptance[name] += sweep()
            if self.cfg.debug_checks:
                self.check()
        if self.cfg.optimize_lambda:
            optimize_lambda(self.state.n_nodes, self.state.net.categories)
            optimize_lambda(self.state.n_nodes, self.state.fields.categories, theta=True)
        self.dl = description_length(self.state)
        return self.dl


def reconstruct_mdl(
    data: Dataset,
    model_kind: ModelKind,
    hyper: Optional[PriorHyper] = None,
    cfg: Optional[OptimizerConfig] = None,
) -> Tuple[WeightedNetwork, NodeFields, RunReport]:
    """
    MAP network under the MDL prior, starting from an empty network.
    Rounds repeat until a full round improves DL by less than tol_nats.
    """
    started = time.perf_counter()
    hyper = hyper or PriorHyper()
    cfg = cfg or OptimizerConfig()
    state = ModelState(data, model_kind, hyper=hyper)
    opt = MDLReconstructor(state, cfg)
    trajectory = [opt.dl]
    converged = True
    report_warnings: List[str] = []
    sweeps = 0

    if state.n_units > 0 and state.n_nodes > 0:
        converged = False
        for sweeps in range(1, cfg.max_sweeps + 1):
            previous = trajectory[-1]
            dl = opt.run_round()
            trajectory.append(dl)
            logger.info(
                "round %d: DL=%.6f E=%d K=%d K_theta=%d",
                sweeps,
                dl,
                state.net.E,
                state.net.categories.K,
                state.fields.categories.K,
            )
            if previous - dl < cfg.tol_nats:
                converged = True
                break
        if not converged:
            message = f"Stopped after max_sweeps={cfg.max_sweeps} without reaching tol={cfg.tol_nats}"
            warnings.warn(message, ConvergenceWarning)
            logger.warning(message)
            report_warnings.append(message)

    net, fields = state.net, state.fields
    report = RunReport(
        method="mdl",
        model=model_kind.token,
        description_length=trajectory[-1],
        loglik=state.loglik(),
        prior_weights=prior_weights_of(state.n_nodes, net.categories),
        prior_theta=prior_theta_of(state.n_nodes, fields.categories),
        n_nodes=state.n_nodes,
        E=net.E,
        K=net.categories.K,
        categories=list(zip(net.categories.values, net.categories.counts)),
        theta_categories=list(zip(fields.categories.values, fields.categories.counts)),
        lam=net.categories.lam,
        delta=net.categories.delta,
        lambda_theta=fields.categories.lam,
        delta_theta=fields.categories.delta,
        sweeps=sweeps,
        acceptance=opt.acceptance,
        dl_trajectory=trajectory,
        converged=converged,
        weight_range=cfg.weight_range,
        seed=cfg.seed,
        wall_time=time.perf_counter() - started,
        warnings=report_warnings,
    )
    return net, fields, report


# ============== SINGLE-SWEEP ENTRY POINTS ==============

def edge_update_sweep(state: ModelState, cands: CandidateSet, cfg: Optional[OptimizerConfig] = None) -> int:
    return MDLReconstructor(state, cfg).edge_update_sweep(cands)


def edge_move_sweep(state: ModelState, cands: CandidateSet, cfg: Optional[OptimizerConfig] = None) -> int:
    return MDLReconstructor(state, cfg).edge_move_sweep(cands)


def edge_swap_sweep(state: ModelState, n_proposals: int, cfg: Optional[OptimizerConfig] = None) -> int:
    return MDLReconstructor(state, cfg).edge_swap_sweep(n_proposals)


def category_value_sweep(state: ModelState, cfg: Optional[OptimizerConfig] = None) -> int:
    return MDLReconstructor(state, cfg).category_value_sweep()


def merge_split_sweep(state: ModelState, cfg: Optional[OptimizerConfig] = None) -> int:
    return MDLReconstructor(state, cfg).merge_split_sweep()
