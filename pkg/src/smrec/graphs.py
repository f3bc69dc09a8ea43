"""Symmetric weighted graphs in proximity space ([0,1]) and distance space ([0,inf]).

Both graph kinds share one compressed sparse storage. Vertices that take part
in the underlying relation carry an explicit self-loop (proximity 1.0,
distance 0.0), which is what keeps proximity<->distance conversion an exact
structural bijection. Absent entries mean 0 in proximity space and infinity
in distance space. Distance data may legitimately contain stored zeros
(a proximity of exactly 1 maps to distance 0), which is why storage is plain
numpy arrays rather than a scipy sparse matrix that may prune explicit zeros.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import ClassVar, Iterable, Iterator, TextIO

import numpy as np

__all__ = [
    "ProximityGraph",
    "DistanceGraph",
    "EdgeListFormatError",
    "load_proximity_edges",
    "load_distance_edges",
]


class EdgeListFormatError(ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


def _as_array(values, dtype) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return values.astype(dtype, copy=False)
    return np.asarray(list(values), dtype=dtype)


def _build_symmetric_csr(size, row, col, weight):
    """Assemble sorted CSR arrays from directed entries (already mirrored)."""
    row = np.asarray(row, dtype=np.int64)
    col = np.asarray(col, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.float64)
    order = np.lexsort((col, row))
    row, col, weight = row[order], col[order], weight[order]
    if row.size:
        dup = (row[1:] == row[:-1]) & (col[1:] == col[:-1])
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate edge ({row[k]}, {col[k]})")
    indptr = np.zeros(size + 1, dtype=np.int64)
    np.add.at(indptr, row + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, col, weight


@dataclass(frozen=True, eq=False)
class _SymmetricGraph:
    """CSR-stored undirected weighted graph with explicit self-loops."""

    labels: np.ndarray  # (size,) external vertex ids, strictly ascending
    indptr: np.ndarray  # (size + 1,)
    indices: np.ndarray  # (nnz,) neighbor vertex indices, sorted within a row
    data: np.ndarray  # (nnz,) edge weights

    # subclasses fix the sparse-entry semantics
    _absent: ClassVar[float] = 0.0
    _loop_value: ClassVar[float] = 0.0

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        """Number of stored undirected off-diagonal edges."""
        rows = np.repeat(np.arange(self.size), np.diff(self.indptr))
        return int((rows < self.indices).sum())

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Stored neighbor indices (self included if looped) and weights."""
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def weight(self, i: int, j: int) -> float:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], j)
        if k < hi and self.indices[k] == j:
            return float(self.data[k])
        return self._absent

    def has_loop(self, v: int) -> bool:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], v)
        return bool(k < hi and self.indices[k] == v)

    def loop_mask(self) -> np.ndarray:
        """Boolean mask of vertices carrying a self-loop (active vertices)."""
        mask = np.zeros(self.size, dtype=bool)
        rows = np.repeat(np.arange(self.size), np.diff(self.indptr))
        mask[rows[rows == self.indices]] = True
        return mask

    def to_dense(self) -> np.ndarray:
        dense = np.full((self.size, self.size), self._absent, dtype=np.float64)
        rows = np.repeat(np.arange(self.size), np.diff(self.indptr))
        dense[rows, self.indices] = self.data
        return dense

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield undirected off-diagonal edges once, as (i, j, w) with i < j."""
        for i in range(self.size):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            for j, w in zip(self.indices[lo:hi], self.data[lo:hi]):
                if i < j:
                    yield i, int(j), float(w)

    def allclose(self, other, tol: float = 0.0) -> bool:
        """Structural equality up to `tol` on weights."""
        if self.size != other.size or not np.array_equal(self.labels, other.labels):
            return False
        if not np.array_equal(self.indptr, other.indptr):
            return False
        if not np.array_equal(self.indices, other.indices):
            return False
        if tol == 0.0:
            return bool(np.array_equal(self.data, other.data))
        return bool(np.allclose(self.data, other.data, rtol=0.0, atol=tol))

    @classmethod
    def from_edges(
        cls,
        labels,
        i: Iterable[int],
        j: Iterable[int],
        w: Iterable[float],
        *,
        active: Iterable[int] | None = None,
    ):
        """Build from undirected off-diagonal edges given once per pair.

        Self-loops are added automatically for every edge endpoint (plus any
        vertex listed in `active`) at the class loop value.
        """
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size > 1 and not (labels[1:] > labels[:-1]).all():
            raise ValueError("labels must be strictly ascending")
        i = _as_array(i, np.int64)
        j = _as_array(j, np.int64)
        w = _as_array(w, np.float64)
        if not (i.size == j.size == w.size):
            raise ValueError("edge arrays must have equal length")
        if (i == j).any():
            raise ValueError("self-loops are implied; pass off-diagonal edges only")
        looped = np.zeros(labels.size, dtype=bool)
        looped[i] = True
        looped[j] = True
        if active is not None:
            looped[_as_array(active, np.int64)] = True
        loops = np.flatnonzero(looped)
        row = np.concatenate([i, j, loops])
        col = np.concatenate([j, i, loops])
        val = np.concatenate([w, w, np.full(loops.size, cls._loop_value)])
        indptr, indices, data = _build_symmetric_csr(labels.size, row, col, val)
        return cls(labels=labels, indptr=indptr, indices=indices, data=data)

    @classmethod
    def from_dense(cls, labels, dense: np.ndarray):
        """Inverse of to_dense(); diagonal entries mark active vertices."""
        labels = np.asarray(labels, dtype=np.int64)
        present = dense != cls._absent
        iu, ju = np.nonzero(np.triu(present, k=1))
        active = np.flatnonzero(np.diagonal(present))
        return cls.from_edges(labels, iu, ju, dense[iu, ju], active=active)

    def _validate_structure(self) -> None:
        n = self.size
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0:
            raise ValueError("malformed indptr")
        if self.indices.shape != self.data.shape:
            raise ValueError("indices/data length mismatch")
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        if self.indices.size and not (np.diff(self.indices) > 0)[np.diff(rows) == 0].all():
            raise ValueError("row indices must be strictly increasing (sorted, no duplicates)")
        # symmetry of structure and weights
        fwd = np.lexsort((self.indices, rows))
        rev = np.lexsort((rows, self.indices))
        if not (
            np.array_equal(rows[fwd], self.indices[rev])
            and np.array_equal(self.indices[fwd], rows[rev])
            and np.array_equal(self.data[fwd], self.data[rev])
        ):
            raise ValueError("graph is not symmetric")
        # every endpoint of an off-diagonal edge must be an active vertex
        off = rows != self.indices
        looped = self.loop_mask()
        if off.any() and not looped[rows[off]].all():
            raise ValueError("edge endpoint without a self-loop")
        diag = self.data[rows == self.indices]
        if diag.size and not (diag == self._loop_value).all():
            raise ValueError(f"self-loop weights must equal {self._loop_value}")


class ProximityGraph(_SymmetricGraph):
    """Reflexive symmetric graph with co-occurrence weights in [0, 1]."""

    _absent: ClassVar[float] = 0.0
    _loop_value: ClassVar[float] = 1.0

    def validate(self) -> None:
        self._validate_structure()
        if self.data.size and not ((self.data > 0.0) & (self.data <= 1.0)).all():
            raise ValueError("proximity weights must lie in (0, 1] when stored")


class DistanceGraph(_SymmetricGraph):
    """Symmetric graph with weights in [0, inf); absent edge means infinity."""

    _absent: ClassVar[float] = np.inf
    _loop_value: ClassVar[float] = 0.0

    def validate(self) -> None:
        self._validate_structure()
        if self.data.size and not ((self.data >= 0.0) & np.isfinite(self.data)).all():
            raise ValueError("stored distances must be finite and non-negative")

    def to_dense(self) -> np.ndarray:
        dense = super().to_dense()
        np.fill_diagonal(dense, 0.0)
        return dense


def save_edges(graph: _SymmetricGraph, path_or_file) -> None:
    """Write `id_a \\t id_b \\t w` per undirected edge, id_a < id_b."""
    close = False
    if hasattr(path_or_file, "write"):
        fh: TextIO = path_or_file
    else:
        fh = open(path_or_file, "w", encoding="utf-8")
        close = True
    try:
        labels = graph.labels
        for i, j, w in graph.edges():
            fh.write(f"{labels[i]}\t{labels[j]}\t{w!r}\n")
    finally:
        if close:
            fh.close()


def _load_edges(path_or_file, cls, labels=None):
    close = False
    if isinstance(path_or_file, (str, os.PathLike)):
        fh = open(path_or_file, "r", encoding="utf-8")
        close = True
    else:
        fh = path_or_file  # file object or any iterable of lines
    a_ids, b_ids, weights = [], [], []
    try:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise EdgeListFormatError(
                    f"expected 3 tab-separated fields, got {len(parts)}", line_no
                )
            try:
                a, b = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError as exc:
                raise EdgeListFormatError(str(exc), line_no) from None
            if np.isinf(w):
                continue  # explicit 'inf' token: same as absent
            a_ids.append(a)
            b_ids.append(b)
            weights.append(w)
    finally:
        if close:
            fh.close()
    if labels is None:
        labels = np.unique(np.asarray(a_ids + b_ids, dtype=np.int64))
    else:
        labels = np.asarray(labels, dtype=np.int64)
    index = {int(v): k for k, v in enumerate(labels)}
    try:
        i = [index[a] for a in a_ids]
        j = [index[b] for b in b_ids]
    except KeyError as exc:
        raise EdgeListFormatError(f"vertex id {exc.args[0]} not in label set") from None
    return cls.from_edges(labels, i, j, weights)


def load_proximity_edges(path_or_file, labels=None) -> ProximityGraph:
    """Read a proximity edge list written by save_edges()."""
    return _load_edges(path_or_file, ProximityGraph, labels)


def load_distance_edges(path_or_file, labels=None) -> DistanceGraph:
    """Read a distance edge list; 'inf' weights are treated as absent."""
    return _load_edges(path_or_file, DistanceGraph, labels)
