"""
Likelihood Service
Kinetic and equilibrium (pseudolikelihood) Ising likelihoods, binary or zero-valued,
with a cached local-field matrix for O(M) single-entry updates
"""

import logging
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from data.errors import DataError
from data.network import NodeFields, WeightCategories, WeightedNetwork, pair_key
from data.schema import Alphabet, Dataset, DataKind, ModelKind, PriorHyper

logger = logging.getLogger(__name__)

Change = Tuple[int, int, float]


# ============== LOCAL NORMALIZERS ==============

def log_partition(s: np.ndarray, zero_valued: bool) -> np.ndarray:
    """log(2cosh s) or log(1 + 2cosh s), stable for large |s|"""
    a = np.abs(s)
    e1 = np.exp(-a)
    if zero_valued:
        return a + np.log(e1 + 1.0 + e1 * e1)
    return a + np.log1p(e1 * e1)


def local_mean(s: np.ndarray, zero_valued: bool) -> np.ndarray:
    """Conditional expectation of x given its local field"""
    if not zero_valued:
        return np.tanh(s)
    a = np.abs(s)
    e1 = np.exp(-a)
    return np.sign(s) * (1.0 - e1 * e1) / (e1 + 1.0 + e1 * e1)


def local_variance(s: np.ndarray, zero_valued: bool) -> np.ndarray:
    """Conditional variance of x given its local field (second derivative of log Z)"""
    if not zero_valued:
        t = np.tanh(s)
        return 1.0 - t * t
    a = np.abs(s)
    e1 = np.exp(-a)
    denom = e1 + 1.0 + e1 * e1
    second = (1.0 + e1 * e1) / denom
    first = (1.0 - e1 * e1) / denom
    return second - first * first


# ============== MODEL STATE ==============

class ModelState:
    """
    Dataset + network + fields with the cache S[i, u] = sum_j W_ij x_j(u) + theta_i.

    Units u are samples for equilibrium models and transitions t -> t+1 for kinetic
    models. The same algebra covers both: the conditional of x_i at unit u has
    target tgt[i, u] and input field built from inp[:, u].
    """

    def __init__(
        self,
        dataset: Dataset,
        model_kind: ModelKind,
        net: Optional[WeightedNetwork] = None,
        fields: Optional[NodeFields] = None,
        columns: Optional[Sequence[int]] = None,
        hyper: Optional[PriorHyper] = None,
    ):
        if dataset.alphabet == Alphabet.ZERO_VALUED and not model_kind.zero_valued:
            raise DataError(
                f"Model {model_kind.token} expects binary data but the dataset is zero-valued"
            )
        if model_kind.kinetic and dataset.kind != DataKind.MARKOV:
            raise DataError("Kinetic models need a Markov trajectory dataset")
        if not model_kind.kinetic and dataset.kind != DataKind.IID:
            raise DataError("Equilibrium models need an iid sample dataset")
        hyper = hyper or PriorHyper()
        N = dataset.n_nodes
        self.dataset = dataset
        self.model_kind = model_kind
        self.zero_valued = model_kind.zero_valued
        self.net = net if net is not None else WeightedNetwork(N, WeightCategories(hyper.delta, hyper.lam))
        self.fields = fields if fields is not None else NodeFields(N, hyper.delta_theta, hyper.lambda_theta)
        if self.net.n_nodes != N or self.fields.n_nodes != N:
            raise DataError(f"Network and fields must have {N} nodes")

        X = dataset.states.astype(float)
        n_units = dataset.n_units
        cols = np.arange(n_units) if columns is None else np.asarray(columns, dtype=int)
        if cols.size and (cols.min() < 0 or cols.max() >= n_units):
            raise DataError(f"Column subset out of range [0, {n_units})")
        self.columns = cols
        if model_kind.kinetic:
            self.inputs = np.ascontiguousarray(X[:, cols])
            self.targets = np.ascontiguousarray(X[:, cols + 1])
        else:
            self.inputs = np.ascontiguousarray(X[:, cols])
            self.targets = self.inputs
        self.recompute()

    # ---------- basic properties ----------

    @property
    def n_nodes(self) -> int:
        return self.dataset.n_nodes

    @property
    def n_units(self) -> int:
        return int(self.columns.size)

    @property
    def local_fields(self) -> np.ndarray:
        view = self.S.view()
        view.flags.writeable = False
        return view

    # ---------- cache maintenance ----------

    def _row_field(self, i: int) -> np.ndarray:
        nbrs = self.net.neighbors(i)
        row = np.full(self.n_units, self.fields.value(i))
        if nbrs:
            idx = sorted(nbrs)
            row = row + np.array([nbrs[k] for k in idx]) @ self.inputs[idx]
        return row

    def _refresh_rows(self, rows: Iterable[int]) -> None:
        for i in set(rows):
            self.S[i] = self._row_field(i)
            self._row_ll[i] = self.targets[i] @ self.S[i] - log_partition(self.S[i], self.zero_valued).sum()

    def recompute(self) -> None:
        """Rebuild the local-field cache from scratch"""
        N = self.n_nodes
        self.S = np.zeros((N, self.n_units))
        self._row_ll = np.zeros(N)
        self._refresh_rows(range(N))

    def cache_error(self) -> float:
        """Largest relative deviation between the cache and a fresh evaluation"""
        fresh = np.vstack([self._row_field(i) for i in range(self.n_nodes)]) if self.n_nodes else self.S
        scale = np.maximum(1.0, np.abs(fresh))
        return float(np.max(np.abs(fresh - self.S) / scale)) if fresh.size else 0.0

    # ---------- likelihood ----------

    def loglik(self) -> float:
        return float(self._row_ll.sum())

    def _row_delta(self, i: int, shift: np.ndarray) -> float:
        new = self.S[i] + shift
        return float(
            self.targets[i] @ shift
            - (log_partition(new, self.zero_valued).sum() - log_partition(self.S[i], self.zero_valued).sum())
        )

    def delta_loglik_edge(self, i: int, j: int, w_new: float) -> float:
        """loglik(W_ij = w_new) - loglik(now) in O(M)"""
        pair_key(i, j)
        d = w_new - self.net.weight(i, j)
        if d == 0:
            return 0.0
        return self._row_delta(i, d * self.inputs[j]) + self._row_delta(j, d * self.inputs[i])

    def _row_shifts(self, changes: Iterable[Change]) -> Dict[int, np.ndarray]:
        final: Dict[Tuple[int, int], float] = {}
        for i, j, w in changes:
            final[pair_key(i, j)] = w
        shifts: Dict[int, np.ndarray] = {}
        for (i, j), w in final.items():
            d = w - self.net.weight(i, j)
            if d == 0:
                continue
            for a, b in ((i, j), (j, i)):
                if a in shifts:
                    shifts[a] = shifts[a] + d * self.inputs[b]
                else:
                    shifts[a] = d * self.inputs[b]
        return shifts

    def delta_loglik_edges(self, changes: Iterable[Change]) -> float:
        """loglik change of setting several entries at once"""
        return sum(self._row_delta(i, shift) for i, shift in self._row_shifts(changes).items())

    def delta_loglik_theta(self, changes: Mapping[int, float]) -> float:
        total = 0.0
        for i, value in changes.items():
            d = value - self.fields.value(i)
            if d:
                total += self._row_delta(i, np.full(self.n_units, d))
        return total

    # ---------- derivatives ----------

    def _row_grad(self, i: int, shift: Optional[np.ndarray] = None) -> np.ndarray:
        s = self.S[i] if shift is None else self.S[i] + shift
        return self.targets[i] - local_mean(s, self.zero_valued)

    def grad_entry(self, i: int, j: int) -> float:
        """d loglik / d W_ij at the current state (both conditionals contribute)"""
        pair_key(i, j)
        return float(self._row_grad(i) @ self.inputs[j] + self._row_grad(j) @ self.inputs[i])

    def entry_derivatives(self, i: int, j: int, w: float) -> Tuple[float, float]:
        """First and second derivative of loglik in W_ij, evaluated at W_ij = w"""
        pair_key(i, j)
        d = w - self.net.weight(i, j)
        si = self.S[i] + d * self.inputs[j]
        sj = self.S[j] + d * self.inputs[i]
        g = (self.targets[i] - local_mean(si, self.zero_valued)) @ self.inputs[j] + (
            self.targets[j] - local_mean(sj, self.zero_valued)
        ) @ self.inputs[i]
        h = -(local_variance(si, self.zero_valued) @ self.inputs[j] ** 2) - (
            local_variance(sj, self.zero_valued) @ self.inputs[i] ** 2
        )
        return float(g), float(h)

    def theta_derivatives(self, i: int, value: float) -> Tuple[float, float]:
        s = self.S[i] + (value - self.fields.value(i))
        g = np.sum(self.targets[i] - local_mean(s, self.zero_valued))
        h = -np.sum(local_variance(s, self.zero_valued))
        return float(g), float(h)

    def gradient_matrix(self) -> np.ndarray:
        """Dense N x N matrix of d loglik / d W_ij (zero diagonal)"""
        G = (self.targets - local_mean(self.S, self.zero_valued)) @ self.inputs.T
        G = G + G.T
        np.fill_diagonal(G, 0.0)
        return G

    # ---------- mutation ----------

    def apply_entry(self, i: int, j: int, w_new: float, create: bool = False) -> float:
        """Set W_ij and refresh the two affected cache rows; returns the previous weight"""
        prev = self.net.set_entry(i, j, w_new, create=create)
        if prev != self.net.weight(i, j):
            self._refresh_rows((i, j))
        return prev

    def apply_entries(self, changes: Sequence[Change], create: bool = True) -> None:
        rows = set()
        for i, j, w in changes:
            prev = self.net.set_entry(i, j, w, create=create)
            if prev != self.net.weight(i, j):
                rows.update((i, j))
        self._refresh_rows(rows)

    def apply_theta(self, i: int, value: float) -> float:
        prev = self.fields.set_value(i, value)
        if prev != self.fields.value(i):
            self._refresh_rows((i,))
        return prev

    def apply_thetas(self, changes: Mapping[int, float]) -> None:
        rows = [i for i, v in changes.items() if self.fields.set_value(i, v) != self.fields.value(i)]
        self._refresh_rows(rows)


# ============== HELD-OUT EVALUATION ==============

def heldout_loglik(
    net: WeightedNetwork,
    fields: NodeFields,
    dataset: Dataset,
    model_kind: ModelKind,
    columns: Optional[Sequence[int]] = None,
) -> float:
    """Log-likelihood of a fitted model on a subset of units it was not fitted on"""
    return ModelState(dataset, model_kind, net=net, fields=fields, columns=columns).loglik()
