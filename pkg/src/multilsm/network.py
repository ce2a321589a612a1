"""Multiplex data model, CSV ingestion and degree/association statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EDGELIST_HEADER = ("view", "from", "to", "value")
_MISSING_TOKENS = {"na", "nan", ""}


class DataValidationError(ValueError):
    """Raised when an input multiplex or file violates the data contract."""


@dataclass(frozen=True)
class Multiplex:
    """A binary multidimensional network.

    Attributes
    ----------
    y : ndarray, shape (K, n, n)
        Binary adjacency entries. Diagonal entries are ignored.
    h : ndarray, shape (K, n, n)
        Observation mask, 1 where the entry is observed.
    x : ndarray, shape (F, n, n)
        Edge covariates shared by all views (``F`` may be 0).
    """

    y: np.ndarray
    h: np.ndarray
    x: np.ndarray = None
    node_labels: tuple = ()
    view_labels: tuple = ()
    directed: bool = True

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim == 2:
            y = y[None]
        h = np.ones_like(y) if self.h is None else np.asarray(self.h, dtype=np.float64)
        if h.ndim == 2:
            h = h[None]
        if y.ndim != 3 or y.shape[1] != y.shape[2]:
            raise DataValidationError("adjacency tensor must have shape (K, n, n)")
        if h.shape != y.shape:
            raise DataValidationError("mask shape does not match adjacency shape")
        K, n, _ = y.shape
        if n < 2 or K < 1:
            raise DataValidationError("need n >= 2 nodes and K >= 1 views")
        if not np.all((y == 0) | (y == 1)):
            raise DataValidationError("non-binary value in adjacency tensor")
        if not np.all((h == 0) | (h == 1)):
            raise DataValidationError("non-binary value in observation mask")
        diag = np.arange(n)
        y = y.copy()
        h = h.copy()
        y[:, diag, diag] = 0.0
        h[:, diag, diag] = 0.0
        # unobserved cells carry no information
        y[h == 0] = 0.0
        if not self.directed:
            if not (np.array_equal(y, y.transpose(0, 2, 1)) and np.array_equal(h, h.transpose(0, 2, 1))):
                raise DataValidationError("undirected multiplex must have symmetric views")
        x = np.zeros((0, n, n)) if self.x is None else np.asarray(self.x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (n, n):
            raise DataValidationError("covariates must have shape (F, n, n)")
        if not self.directed and not np.array_equal(x, x.transpose(0, 2, 1)):
            raise DataValidationError("undirected multiplex needs symmetric covariates")
        node_labels = tuple(str(s) for s in self.node_labels) or tuple(str(i + 1) for i in range(n))
        view_labels = tuple(str(s) for s in self.view_labels) or tuple(str(k + 1) for k in range(K))
        if len(node_labels) != n or len(view_labels) != K:
            raise DataValidationError("label counts do not match tensor dimensions")
        for arr in (y, h, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "node_labels", node_labels)
        object.__setattr__(self, "view_labels", view_labels)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def K(self) -> int:
        return self.y.shape[0]

    @property
    def F(self) -> int:
        return self.x.shape[0]

    def with_covariates(self, x) -> "Multiplex":
        return Multiplex(self.y, self.h, x, self.node_labels, self.view_labels, self.directed)

    def density(self) -> np.ndarray:
        """Observed density per view."""
        return (self.y * self.h).sum(axis=(1, 2)) / np.maximum(self.h.sum(axis=(1, 2)), 1)


def _parse_value(token: str, where: str) -> Optional[float]:
    t = token.strip()
    if t.lower() in _MISSING_TOKENS:
        return None
    try:
        v = float(t)
    except ValueError:
        raise DataValidationError(f"non-binary value {t!r} at {where}") from None
    if v not in (0.0, 1.0):
        raise DataValidationError(f"non-binary value {t!r} at {where}")
    return v


def _read_rows(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        rows = [[c.strip() for c in row] for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataValidationError(f"empty file: {path}")
    return rows


def load_multiplex(path, format: str = "edgelist-csv", node_labels: Sequence[str] = None,
                   directed: bool = True) -> Multiplex:
    """Read a multiplex from CSV.

    ``edgelist-csv`` rows are ``(view, from, to, value)`` with value in
    ``{0, 1, NA}``; dyads that are not listed are observed zeros. When
    ``node_labels`` is omitted the labels are collected in order of first
    appearance. ``adjacency-csv`` has a header ``view,<label_1>,...,<label_n>``
    followed by ``K`` stacked blocks of ``n`` rows.
    """
    if format == "edgelist-csv":
        return _load_edgelist(path, node_labels, directed)
    if format == "adjacency-csv":
        return _load_adjacency(path, directed)
    raise ValueError(f"unknown format {format!r}")


def _load_edgelist(path, node_labels, directed) -> Multiplex:
    rows = _read_rows(path)
    if tuple(c.lower() for c in rows[0]) == EDGELIST_HEADER:
        rows = rows[1:]
    if not rows:
        raise DataValidationError(f"empty file: {path}")
    views: list = []
    labels = list(node_labels) if node_labels is not None else []
    index = {lab: i for i, lab in enumerate(labels)}
    entries = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise DataValidationError(f"row {lineno}: expected 4 columns (view, from, to, value)")
        view, src, dst, value = row
        if view not in views:
            views.append(view)
        for lab in (src, dst):
            if lab not in index:
                if node_labels is not None:
                    raise DataValidationError(f"row {lineno}: unknown node label {lab!r}")
                index[lab] = len(labels)
                labels.append(lab)
        if src == dst:
            raise DataValidationError(f"row {lineno}: self-loop on node {src!r}")
        entries.append((views.index(view), index[src], index[dst], _parse_value(value, f"row {lineno}")))
    n, K = len(labels), len(views)
    if n < 2:
        raise DataValidationError("need at least two nodes")
    y = np.zeros((K, n, n))
    h = np.ones((K, n, n))
    seen = {}
    for k, i, j, v in entries:
        cells = [(i, j)] if directed else [(i, j), (j, i)]
        for a, b in cells:
            prev = seen.get((k, a, b))
            if prev is not None and prev != v:
                raise DataValidationError(f"conflicting values for dyad ({labels[a]}, {labels[b]}) in view {views[k]}")
            seen[(k, a, b)] = v
            if v is None:
                h[k, a, b] = 0.0
                y[k, a, b] = 0.0
            else:
                h[k, a, b] = 1.0
                y[k, a, b] = v
    return Multiplex(y, h, None, tuple(labels), tuple(views), directed)


def _load_adjacency(path, directed) -> Multiplex:
    rows = _read_rows(path)
    header, body = rows[0], rows[1:]
    if not header or header[0].lower() != "view":
        raise DataValidationError("adjacency-csv header must start with 'view'")
    labels = header[1:]
    n = len(labels)
    if n < 2:
        raise DataValidationError("need at least two nodes")
    if not body:
        raise DataValidationError(f"empty file: {path}")
    views: list = []
    blocks: dict = {}
    for lineno, row in enumerate(body, start=2):
        if len(row) != n + 1:
            raise DataValidationError(f"ragged matrix at line {lineno}")
        view = row[0]
        if view not in blocks:
            views.append(view)
            blocks[view] = []
        blocks[view].append([_parse_value(t, f"line {lineno}") for t in row[1:]])
    K = len(views)
    y = np.zeros((K, n, n))
    h = np.ones((K, n, n))
    for k, view in enumerate(views):
        block = blocks[view]
        if len(block) != n:
            raise DataValidationError(f"ragged matrix: view {view!r} has {len(block)} rows, expected {n}")
        for i, vals in enumerate(block):
            for j, v in enumerate(vals):
                if i == j:
                    if v == 1.0:
                        raise DataValidationError(f"self-loop on node {labels[i]!r} in view {view!r}")
                    continue
                if v is None:
                    h[k, i, j] = 0.0
                else:
                    y[k, i, j] = v
    return Multiplex(y, h, None, tuple(labels), tuple(views), directed)


def load_covariates(path, node_labels: Sequence[str], directed: bool = True) -> np.ndarray:
    """Read edge covariates from rows ``(from, to, f1, ..., fF)``.

    Returns an array of shape (F, n, n); unlisted dyads are 0. For undirected
    data each row fills both orientations of the dyad.
    """
    rows = _read_rows(path)
    index = {lab: i for i, lab in enumerate(node_labels)}
    if rows[0][0].lower() == "from" and rows[0][1].lower() == "to":
        rows = rows[1:]
    if not rows:
        raise DataValidationError(f"empty file: {path}")
    F = len(rows[0]) - 2
    if F < 1:
        raise DataValidationError("covariate file needs at least one covariate column")
    n = len(node_labels)
    x = np.zeros((F, n, n))
    for lineno, row in enumerate(rows, start=1):
        if len(row) != F + 2:
            raise DataValidationError(f"ragged covariate row {lineno}")
        src, dst = row[0], row[1]
        if src not in index or dst not in index:
            raise DataValidationError(f"covariate row {lineno}: unknown node label")
        try:
            vals = [float(v) for v in row[2:]]
        except ValueError:
            raise DataValidationError(f"covariate row {lineno}: non-numeric value") from None
        x[:, index[src], index[dst]] = vals
        if not directed:
            x[:, index[dst], index[src]] = vals
    return x


def write_edgelist(m: Multiplex, path) -> None:
    """Write every off-diagonal dyad of ``m`` in edgelist-csv format."""
    n = m.n
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGELIST_HEADER)
        for k in range(m.K):
            for i in range(n):
                for j in range(n):
                    if i == j or (not m.directed and j < i):
                        continue
                    value = "NA" if m.h[k, i, j] == 0 else str(int(m.y[k, i, j]))
                    w.writerow((m.view_labels[k], m.node_labels[i], m.node_labels[j], value))


def degrees(m: Multiplex):
    """Observed out- and in-degree matrices, each of shape (n, K).

    Missing entries contribute nothing.
    """
    obs = m.y * m.h
    S = obs.sum(axis=2).T
    R = obs.sum(axis=1).T
    return S, R


def association(m: Multiplex, k: int, l: int) -> float:
    """Share of concordant off-diagonal cells between views ``k`` and ``l``.

    Cells missing in either view are left out of both counts.
    """
    both = (m.h[k] * m.h[l]).astype(bool)
    np.fill_diagonal(both, False)
    total = int(both.sum())
    if total == 0:
        raise DataValidationError(f"views {k} and {l} have no commonly observed cells")
    concordant = int((m.y[k][both] == m.y[l][both]).sum())
    discordant = total - concordant
    return concordant / (concordant + discordant)


def association_matrix(m: Multiplex) -> np.ndarray:
    A = np.ones((m.K, m.K))
    for k in range(m.K):
        for l in range(k + 1, m.K):
            A[k, l] = A[l, k] = association(m, k, l)
    return A
