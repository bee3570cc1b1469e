"""
Graph State
Sparse symmetric weight matrix, weight categories and node fields.
Owns the mutable reconstruction state and enforces the coupling invariants
between stored weights and their categories.
"""

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import numpy as np
from scipy import sparse

from config import DEFAULT_DELTA, DEFAULT_LAMBDA
from data.errors import CategoryError, SelfLoopError, UnknownCategoryError

Pair = Tuple[int, int]


def pair_key(i: int, j: int) -> Pair:
    """Canonical (min, max) key of an undirected entry"""
    if i == j:
        raise SelfLoopError(i)
    return (i, j) if i < j else (j, i)


def snap(value: float, delta: float) -> float:
    """Round onto the delta grid (round-half-to-even)"""
    return delta * round(value / delta)


# ============== CATEGORIES ==============

@dataclass(frozen=True)
class CategoryStats:
    """Summary of a category set, all the prior needs"""
    n_categories: int
    total: int
    sum_log_fact: float
    sum_abs: float
    has_zero: bool


class WeightCategories:
    """
    Ordered set of distinct category values with member counts.
    Used for the edge weights (zero excluded) and, with allow_zero, for node fields.
    """

    def __init__(self, delta: float = DEFAULT_DELTA, lam: float = DEFAULT_LAMBDA, allow_zero: bool = False):
        if delta <= 0 or lam <= 0:
            raise CategoryError("delta and lambda must be strictly positive")
        self.delta = delta
        self.lam = lam
        self.allow_zero = allow_zero
        self._counts: Dict[float, int] = {}
        self._values: List[float] = []  # kept sorted
        self._pending: Set[float] = set()

    def snap(self, value: float) -> float:
        return snap(value, self.delta)

    def on_grid(self, value: float) -> bool:
        return math.isclose(value, self.snap(value), rel_tol=1e-9, abs_tol=1e-6 * self.delta)

    @property
    def values(self) -> List[float]:
        return list(self._values)

    @property
    def counts(self) -> List[int]:
        return [self._counts[v] for v in self._values]

    @property
    def K(self) -> int:
        return len(self._values)

    @property
    def total(self) -> int:
        return sum(self._counts.values())

    def __contains__(self, value: float) -> bool:
        return value in self._counts

    def __len__(self) -> int:
        return len(self._values)

    def count(self, value: float) -> int:
        return self._counts.get(value, 0)

    def index_of(self, value: float) -> int:
        idx = bisect_left(self._values, value)
        if idx == len(self._values) or self._values[idx] != value:
            raise UnknownCategoryError(value)
        return idx

    def create(self, value: float) -> float:
        """
        Register a category value ahead of its first member.
        The value only counts towards K once an entry uses it.
        """
        value = self.snap(value)
        if value == 0 and not self.allow_zero:
            raise CategoryError("Weight categories cannot take the value 0")
        if value not in self._counts:
            self._pending.add(value)
        return value

    def resolve(self, value: float, create: bool = False) -> float:
        """Snap a value and check that it names a category (or may create one)"""
        value = self.snap(value)
        if value == 0 and not self.allow_zero:
            raise CategoryError("Weight categories cannot take the value 0")
        if value in self._counts or value in self._pending or create:
            return value
        raise UnknownCategoryError(value)

    def _increment(self, value: float, by: int) -> None:
        old = self._counts.get(value, 0)
        new = old + by
        if new < 0:
            raise CategoryError(f"Negative count for category {value!r}")
        if new == 0:
            if old:
                del self._counts[value]
                self._values.pop(bisect_left(self._values, value))
            return
        if old == 0:
            self._pending.discard(value)
            self._values.insert(bisect_left(self._values, value), value)
        self._counts[value] = new

    def stats(self) -> CategoryStats:
        return self.preview({})

    def preview(self, deltas: Mapping[float, int]) -> CategoryStats:
        """Category summary after applying count changes {value: +/-n}, without mutating"""
        n_cats = len(self._counts)
        total = 0
        sum_log_fact = 0.0
        sum_abs = 0.0
        has_zero = False
        for value, count in self._counts.items():
            count += deltas.get(value, 0)
            if count < 0:
                raise CategoryError(f"Negative count for category {value!r}")
            if count == 0:
                n_cats -= 1
                continue
            total += count
            sum_log_fact += math.lgamma(count + 1)
            sum_abs += abs(value)
            has_zero = has_zero or value == 0
        for value, change in deltas.items():
            if value in self._counts or change == 0:
                continue
            if change < 0:
                raise CategoryError(f"Negative count for category {value!r}")
            n_cats += 1
            total += change
            sum_log_fact += math.lgamma(change + 1)
            sum_abs += abs(value)
            has_zero = has_zero or value == 0
        return CategoryStats(n_cats, total, sum_log_fact, sum_abs, has_zero)

    def check_invariants(self) -> None:
        if self._values != sorted(self._counts):
            raise CategoryError("Category values out of order")
        for value, count in self._counts.items():
            if count < 1:
                raise CategoryError(f"Category {value!r} has count {count}")
            if value == 0 and not self.allow_zero:
                raise CategoryError("Zero-valued weight category")
            if not self.on_grid(value):
                raise CategoryError(f"Category {value!r} is off the delta grid")

    def copy(self) -> "WeightCategories":
        other = WeightCategories(self.delta, self.lam, self.allow_zero)
        other._counts = dict(self._counts)
        other._values = list(self._values)
        other._pending = set(self._pending)
        return other


# ============== WEIGHTED NETWORK ==============

class WeightedNetwork:
    """
    Sparse symmetric weight matrix with no self-loops.
    Entries are stored once under (min(i,j), max(i,j)); every stored weight is
    nonzero and equal to one category value.
    """

    def __init__(self, n_nodes: int, categories: Optional[WeightCategories] = None):
        if n_nodes < 0:
            raise ValueError("n_nodes must be non-negative")
        self.n_nodes = n_nodes
        self.categories = categories if categories is not None else WeightCategories()
        self._weights: Dict[Pair, float] = {}
        self._adj: List[Dict[int, float]] = [dict() for _ in range(n_nodes)]
        self._members: Dict[float, Set[Pair]] = {}

    # ---------- queries ----------

    def weight(self, i: int, j: int) -> float:
        return self._weights.get(pair_key(i, j), 0.0)

    @property
    def n_edges(self) -> int:
        return len(self._weights)

    @property
    def E(self) -> int:
        return len(self._weights)

    def edges(self) -> List[Tuple[int, int, float]]:
        """Sorted (i, j, w) triples with i < j"""
        return [(i, j, w) for (i, j), w in sorted(self._weights.items())]

    def pairs(self) -> List[Pair]:
        return sorted(self._weights)

    def has_edge(self, i: int, j: int) -> bool:
        return pair_key(i, j) in self._weights

    def neighbors(self, i: int) -> Dict[int, float]:
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def degrees(self) -> List[int]:
        return [len(a) for a in self._adj]

    def category_of(self, i: int, j: int) -> int:
        w = self.weight(i, j)
        if w == 0:
            raise KeyError(f"No edge at ({i}, {j})")
        return self.categories.index_of(w)

    def members(self, value: float) -> List[Pair]:
        return sorted(self._members.get(value, ()))

    def binarize(self) -> FrozenSet[Pair]:
        """Adjacency mask: the set of pairs with |W_ij| > 0"""
        return frozenset(p for p, w in self._weights.items() if abs(w) > 0)

    # ---------- mutation ----------

    def set_entry(self, i: int, j: int, w: float, create: bool = False) -> float:
        """
        Set W_ij (and W_ji). Returns the previous weight.
        A nonzero w must name an existing (or pending) category unless create=True.
        """
        key = pair_key(i, j)
        if w != 0:
            w = self.categories.resolve(w, create=create)
        prev = self._weights.get(key, 0.0)
        if prev == w:
            return prev
        a, b = key
        if prev != 0:
            self.categories._increment(prev, -1)
            members = self._members[prev]
            members.discard(key)
            if not members:
                del self._members[prev]
        if w == 0:
            del self._weights[key]
            del self._adj[a][b]
            del self._adj[b][a]
        else:
            self.categories._increment(w, 1)
            self._members.setdefault(w, set()).add(key)
            self._weights[key] = w
            self._adj[a][b] = w
            self._adj[b][a] = w
        return prev

    def relabel_category(self, old: float, new: float, create: bool = True) -> List[Pair]:
        """Move every member of category `old` to value `new` (merging if new exists)"""
        moved = self.members(old)
        for i, j in moved:
            self.set_entry(i, j, new, create=create)
        return moved

    # ---------- conversion ----------

    def to_dense(self) -> np.ndarray:
        W = np.zeros((self.n_nodes, self.n_nodes))
        for (i, j), w in self._weights.items():
            W[i, j] = W[j, i] = w
        return W

    def to_sparse(self) -> sparse.csr_matrix:
        if not self._weights:
            return sparse.csr_matrix((self.n_nodes, self.n_nodes))
        rows, cols = zip(*self._weights)
        vals = list(self._weights.values())
        W = sparse.coo_matrix(
            (vals + vals, (list(rows) + list(cols), list(cols) + list(rows))),
            shape=(self.n_nodes, self.n_nodes),
        )
        return W.tocsr()

    @classmethod
    def from_edges(
        cls,
        n_nodes: int,
        edges: Iterable[Tuple[int, int, float]],
        delta: float = DEFAULT_DELTA,
        lam: float = DEFAULT_LAMBDA,
    ) -> "WeightedNetwork":
        """Build a network whose categories are the distinct (snapped) weights"""
        net = cls(n_nodes, WeightCategories(delta, lam))
        for i, j, w in edges:
            if w != 0:
                net.set_entry(int(i), int(j), float(w), create=True)
        return net

    @classmethod
    def from_mask(cls, n_nodes: int, mask: Iterable[Pair], value: float = 1.0) -> "WeightedNetwork":
        return cls.from_edges(n_nodes, ((i, j, value) for i, j in mask))

    def copy(self) -> "WeightedNetwork":
        other = WeightedNetwork(self.n_nodes, self.categories.copy())
        other._weights = dict(self._weights)
        other._adj = [dict(a) for a in self._adj]
        other._members = {v: set(m) for v, m in self._members.items()}
        return other

    def check_invariants(self) -> None:
        """Recount everything from scratch and compare with the maintained state"""
        self.categories.check_invariants()
        recount: Dict[float, int] = {}
        for (i, j), w in self._weights.items():
            if i >= j:
                raise CategoryError(f"Entry ({i}, {j}) not stored with i < j")
            if w == 0:
                raise CategoryError(f"Zero weight stored at ({i}, {j})")
            if self._adj[i].get(j) != w or self._adj[j].get(i) != w:
                raise CategoryError(f"Adjacency out of sync at ({i}, {j})")
            recount[w] = recount.get(w, 0) + 1
        if recount != {v: self.categories.count(v) for v in self.categories.values}:
            raise CategoryError("Category counts do not match stored weights")
        if sum(len(a) for a in self._adj) != 2 * len(self._weights):
            raise CategoryError("Adjacency holds entries absent from the weight map")
        for value, members in self._members.items():
            if any(self._weights.get(p) != value for p in members) or len(members) != recount.get(value):
                raise CategoryError(f"Member index out of sync for category {value!r}")
        max_edges = self.n_nodes * (self.n_nodes - 1) // 2
        if not 0 <= len(self._weights) <= max_edges:
            raise CategoryError("Edge count out of range")


# ============== NODE FIELDS ==============

class NodeFields:
    """
    Per-node parameters theta with their own category set (zero allowed).
    Every node always belongs to exactly one category.
    """

    def __init__(
        self,
        n_nodes: int,
        delta_theta: float = DEFAULT_DELTA,
        lambda_theta: float = DEFAULT_LAMBDA,
        theta: Optional[Iterable[float]] = None,
    ):
        self.n_nodes = n_nodes
        self.categories = WeightCategories(delta_theta, lambda_theta, allow_zero=True)
        values = np.zeros(n_nodes) if theta is None else np.asarray(list(theta), dtype=float)
        if values.shape != (n_nodes,):
            raise CategoryError(f"Expected {n_nodes} field values, got {values.shape}")
        self._theta = np.array([self.categories.snap(v) for v in values], dtype=float)
        for v in self._theta:
            self.categories._increment(float(v), 1)

    @property
    def theta(self) -> np.ndarray:
        view = self._theta.view()
        view.flags.writeable = False
        return view

    @property
    def delta_theta(self) -> float:
        return self.categories.delta

    @property
    def lambda_theta(self) -> float:
        return self.categories.lam

    def value(self, i: int) -> float:
        return float(self._theta[i])

    def set_value(self, i: int, value: float, create: bool = True) -> float:
        value = self.categories.resolve(value, create=create)
        prev = float(self._theta[i])
        if prev == value:
            return prev
        self.categories._increment(prev, -1)
        self.categories._increment(value, 1)
        self._theta[i] = value
        return prev

    def members(self, value: float) -> List[int]:
        return [int(i) for i in np.flatnonzero(self._theta == value)]

    def relabel_category(self, old: float, new: float) -> List[int]:
        moved = self.members(old)
        for i in moved:
            self.set_value(i, new)
        return moved

    def copy(self) -> "NodeFields":
        return NodeFields(self.n_nodes, self.delta_theta, self.lambda_theta, self._theta)

    def check_invariants(self) -> None:
        self.categories.check_invariants()
        values, counts = np.unique(self._theta, return_counts=True)
        if dict(zip(values.tolist(), counts.tolist())) != {
            v: self.categories.count(v) for v in self.categories.values
        }:
            raise CategoryError("Field category counts do not match theta")
        if self.categories.total != self.n_nodes:
            raise CategoryError("Field category counts do not sum to N")
