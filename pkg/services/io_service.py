"""
IO Service
Data matrices (TSV/CSV/XLSX), network edge lists with JSON sidecars, and report writers
"""

import json
import logging
import sys
from pathlib import Path
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from data.errors import CategoryError, DataError
from data.network import NodeFields, WeightCategories, WeightedNetwork
from data.schema import (
    ALPHABET_VALUES,
    Alphabet,
    Dataset,
    DataKind,
    DecimationTrajectory,
    NetworkSidecar,
    PerturbationResult,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
LABELS_HEADER = "#labels"


# ============== DATA MATRICES ==============

class DataMatrixParser:
    """
    Parses node-state matrices: rows are nodes, columns are samples.
    A first line `#labels` means every row starts with a node label.
    Other lines starting with '#' are comments.
    """

    def parse(
        self,
        path: PathLike,
        alphabet: Alphabet = Alphabet.BINARY,
        kind: DataKind = DataKind.IID,
        map_zero: bool = False,
    ) -> Dataset:
        path = Path(path)
        if not path.exists():
            raise DataError(f"No such data file: {path}")
        if path.suffix.lower() == ".xlsx":
            rows = self._rows_excel(path)
        else:
            rows = self._rows_text(path)
        return self._build(rows, path, alphabet, kind, map_zero)

    def _rows_text(self, path: Path) -> List[Tuple[int, List[str]]]:
        delimiter = "," if path.suffix.lower() == ".csv" else None
        rows = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                text = line.strip()
                if not text:
                    continue
                cells = [c.strip() for c in text.split(delimiter)] if delimiter else text.split()
                rows.append((lineno, cells))
        return rows

    def _rows_excel(self, path: Path) -> List[Tuple[int, List[str]]]:
        from openpyxl import load_workbook

        wb = load_workbook(path, read_only=True, data_only=True)
        ws = wb.worksheets[0]
        rows = []
        for lineno, row in enumerate(ws.iter_rows(values_only=True), start=1):
            cells = ["" if v is None else str(v).strip() for v in row]
            while cells and cells[-1] == "":
                cells.pop()
            if cells:
                rows.append((lineno, cells))
        wb.close()
        return rows

    def _build(
        self,
        rows: List[Tuple[int, List[str]]],
        path: Path,
        alphabet: Alphabet,
        kind: DataKind,
        map_zero: bool,
    ) -> Dataset:
        has_labels = bool(rows) and rows[0][1][0].lower() == LABELS_HEADER
        if has_labels:
            rows = rows[1:]
        rows = [(n, cells) for n, cells in rows if not cells[0].startswith("#")]
        if not rows:
            raise DataError(f"{path}: empty data file")

        allowed = {0, 1} if map_zero else ALPHABET_VALUES[alphabet]
        offset = 1 if has_labels else 0
        labels: List[str] = []
        matrix: List[List[int]] = []
        width = None
        for lineno, cells in rows:
            if has_labels:
                labels.append(cells[0])
            values = cells[offset:]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(f"{path}: row {lineno} has {len(values)} values, expected {width}")
            parsed = []
            for col, cell in enumerate(values, start=offset + 1):
                try:
                    number = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric value {cell!r} at row {lineno}, column {col}") from None
                if number not in allowed:
                    raise DataError(f"{path}: value {cell!r} at row {lineno}, column {col} is outside the alphabet")
                parsed.append(int(number))
            matrix.append(parsed)

        states = np.array(matrix, dtype=np.int8).reshape(len(matrix), width or 0)
        if map_zero:
            states = np.where(states == 0, -1, states).astype(np.int8)
        return Dataset(states=states, kind=kind, alphabet=alphabet, labels=labels if has_labels else None)


data_parser = DataMatrixParser()


def parse_data_matrix(
    path: PathLike,
    alphabet: Alphabet = Alphabet.BINARY,
    kind: DataKind = DataKind.IID,
    map_zero: bool = False,
) -> Dataset:
    """Read and validate a node-state matrix; labels (if any) travel on the Dataset"""
    return data_parser.parse(path, alphabet, kind, map_zero)


def write_data_matrix(
    out: Optional[PathLike], dataset: Dataset, labels: Optional[Sequence[str]] = None
) -> None:
    """Tab-separated matrix, rows = nodes; `-` or None writes to stdout"""
    labels = labels if labels is not None else dataset.labels
    stream = _open_out(out)
    try:
        if labels is not None:
            stream.write(LABELS_HEADER + "\n")
        for i, row in enumerate(dataset.states):
            cells = [str(int(v)) for v in row]
            if labels is not None:
                cells.insert(0, str(labels[i]))
            stream.write("\t".join(cells) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


# ============== NETWORKS ==============

def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_network(
    path: PathLike,
    net: WeightedNetwork,
    fields: Optional[NodeFields] = None,
    labels: Optional[Sequence[str]] = None,
    model: Optional[str] = None,
) -> None:
    """Edge list `i<TAB>j<TAB>weight` (17 significant digits) plus a JSON sidecar"""
    with open(path, "w", encoding="utf-8") as f:
        for i, j, w in net.edges():
            f.write(f"{i}\t{j}\t{w:.17g}\n")
    cats = net.categories
    sidecar = NetworkSidecar(
        n_nodes=net.n_nodes,
        E=net.E,
        delta=cats.delta,
        lam=cats.lam,
        categories=list(zip(cats.values, cats.counts)),
        theta=[] if fields is None else [float(v) for v in fields.theta],
        delta_theta=cats.delta if fields is None else fields.delta_theta,
        lambda_theta=cats.lam if fields is None else fields.lambda_theta,
        labels=list(labels) if labels is not None else None,
        model=model,
    )
    sidecar_path(path).write_text(sidecar.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")


def _parse_edge_lines(path: Path, with_weights: bool) -> List[Tuple[int, int, float]]:
    edges = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) not in ((3,) if with_weights else (2, 3)):
                raise DataError(f"{path}: malformed line {lineno}: {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise DataError(f"{path}: malformed line {lineno}: {text!r}") from None
            if i == j:
                raise DataError(f"{path}: self-loop ({i}, {j}) on line {lineno}")
            if i < 0 or j < 0:
                raise DataError(f"{path}: negative node index on line {lineno}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DataError(f"{path}: duplicate pair {key} on line {lineno}")
            seen.add(key)
            edges.append((key[0], key[1], w))
    return edges


def read_network(path: PathLike) -> Tuple[WeightedNetwork, NodeFields, Optional[NetworkSidecar]]:
    """Inverse of write_network; without a sidecar, N is the largest index + 1"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"No such network file: {path}")
    edges = _parse_edge_lines(path, with_weights=True)
    meta_file = sidecar_path(path)
    sidecar = None
    if meta_file.exists():
        try:
            sidecar = NetworkSidecar.model_validate(json.loads(meta_file.read_text(encoding="utf-8")))
        except (ValueError, TypeError) as e:
            raise DataError(f"{meta_file}: invalid sidecar: {e}") from None
    n_nodes = sidecar.n_nodes if sidecar else max((max(i, j) for i, j, _ in edges), default=-1) + 1
    if any(j >= n_nodes for _, j, _ in edges):
        raise DataError(f"{path}: node index exceeds n_nodes={n_nodes}")

    cats = WeightCategories(sidecar.delta, sidecar.lam) if sidecar else WeightCategories()
    net = WeightedNetwork(n_nodes, cats)
    for i, j, w in edges:
        if w != 0:
            net.set_entry(i, j, w, create=True)
    if sidecar is not None:
        recorded = [(cats.snap(v), c) for v, c in sidecar.categories]
        if recorded != list(zip(cats.values, cats.counts)):
            raise CategoryError(f"{meta_file}: categories disagree with the edge list")
        theta = sidecar.theta or None
        fields = NodeFields(n_nodes, sidecar.delta_theta, sidecar.lambda_theta, theta)
    else:
        fields = NodeFields(n_nodes)
    return net, fields, sidecar


def read_edge_list(path: PathLike) -> Tuple[int, List[Tuple[int, int]]]:
    """Unweighted `i j` lines (a third column is ignored); a `# nodes N` comment fixes N"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"No such edge list: {path}")
    n_nodes = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.strip().lstrip("#").split()
            if line.startswith("#") and len(parts) == 2 and parts[0].lower() == "nodes":
                n_nodes = int(parts[1])
    edges = [(i, j) for i, j, _ in _parse_edge_lines(path, with_weights=False)]
    if n_nodes is None:
        n_nodes = max((j for _, j in edges), default=-1) + 1
    return n_nodes, edges


# ============== REPORTS ==============

def _open_out(out: Optional[PathLike]) -> IO:
    return sys.stdout if out is None or str(out) == "-" else open(out, "w", encoding="utf-8")


def write_report(report: BaseModel, out: Optional[PathLike] = None, exclude: Optional[Iterable[str]] = None) -> None:
    """JSON dump of any result model (RunReport, CvResult, ...) to a file or stdout"""
    text = report.model_dump_json(by_alias=True, indent=2, exclude=set(exclude) if exclude else None)
    stream = _open_out(out)
    try:
        stream.write(text + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def write_json(payload: dict, out: Optional[PathLike] = None) -> None:
    stream = _open_out(out)
    try:
        stream.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def write_decimation(traj: DecimationTrajectory, out: Optional[PathLike] = None) -> None:
    stream = _open_out(out)
    try:
        stream.write(f"# stop: {traj.stop_reason}\n")
        stream.write("E_active\tloglik\n")
        for step in traj.steps:
            stream.write(f"{step.E_active}\t{step.loglik:.17g}\n")
    finally:
        if stream is not sys.stdout:
            stream.close()


def write_perturbations(results: Sequence[PerturbationResult], out: Optional[PathLike] = None) -> None:
    stream = _open_out(out)
    try:
        stream.write("node\tz\tstderr\tequilibrated\tr_hat\n")
        for r in results:
            stream.write(f"{r.node_j}\t{r.z_value:.10g}\t{r.mc_stderr:.10g}\t{int(r.equilibrated)}\t{r.r_hat:.6g}\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
