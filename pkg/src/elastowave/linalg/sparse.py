"""CSR storage and a triplet builder."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed sparse row matrix with float64 values.

    Column indices are strictly increasing within each row.  Instances are
    treated as immutable once built.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray = field(repr=False)
    col_indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.row_offsets.shape != (self.nrows + 1,):
            raise ValueError("row_offsets must have length nrows + 1")
        if self.row_offsets[-1] != self.col_indices.size:
            raise ValueError("row_offsets[-1] must equal the number of stored entries")
        if self.col_indices.size != self.values.size:
            raise ValueError("col_indices and values differ in length")

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry (COO rows)."""
        return np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.nrows, self.ncols))
        rows = self.row_ids
        on = rows == self.col_indices
        d[rows[on]] = self.values[on]
        return d

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_ids, self.col_indices), self.values)
        return out

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.nnz else 0.0

    def is_symmetric(self, tol: float = 0.0) -> bool:
        if self.nrows != self.ncols:
            return False
        other = transpose(self)
        if not (np.array_equal(other.row_offsets, self.row_offsets)
                and np.array_equal(other.col_indices, self.col_indices)):
            return False
        return bool(np.all(np.abs(other.values - self.values) <= tol))

    def __matmul__(self, x):
        from . import spmv

        return spmv(self, x)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        rows, cols = np.nonzero(a)
        b = TripletBuilder()
        b.add(rows, cols, a[rows, cols])
        return b.finalize(*a.shape)


class TripletBuilder:
    """Accumulates (row, col, value) entries; duplicates are summed."""

    def __init__(self):
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add(self, rows, cols, values) -> None:
        rows, cols, values = np.broadcast_arrays(
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(values, dtype=float),
        )
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(values.ravel())

    def finalize(self, nrows: int, ncols: int) -> SparseMatrix:
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        if rows.size and (rows.min() < 0 or rows.max() >= nrows
                          or cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("triplet index out of range")
        keys = rows * ncols + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        summed = np.bincount(inverse, weights=vals, minlength=uniq.size)
        urows = uniq // ncols
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(np.bincount(urows, minlength=nrows), out=offsets[1:])
        return SparseMatrix(nrows, ncols, offsets, (uniq % ncols).astype(np.int64),
                            summed.astype(float))


def transpose(a: SparseMatrix) -> SparseMatrix:
    b = TripletBuilder()
    b.add(a.col_indices, a.row_ids, a.values)
    return b.finalize(a.ncols, a.nrows)


def linear_combination(terms) -> SparseMatrix:
    """Return ``sum(c * A for c, A in terms)`` over matrices of equal shape."""
    terms = list(terms)
    shape = terms[0][1].shape
    b = TripletBuilder()
    for c, a in terms:
        if a.shape != shape:
            raise ValueError("shape mismatch in linear_combination")
        b.add(a.row_ids, a.col_indices, c * a.values)
    return b.finalize(*shape)
