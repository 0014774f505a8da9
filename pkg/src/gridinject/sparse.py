"""Compressed sparse column storage and the baseline kernels on it.

All indices are 0-based. Explicit zeros are legal and kept: pattern reuse
depends on structural entries whose value happens to be zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ConstructionError, DomainError


@dataclass
class CscMatrix:
    """CSC matrix. Structure (``col_start``, ``row_idx``) is treated as frozen;
    ``nzval`` may be overwritten in place by assembly kernels."""

    n_rows: int
    n_cols: int
    col_start: np.ndarray
    row_idx: np.ndarray
    nzval: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.nzval)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def dtype(self):
        return self.nzval.dtype

    def check(self) -> None:
        """Raise ConstructionError if the CSC invariants do not hold."""
        cs, ri = self.col_start, self.row_idx
        if len(cs) != self.n_cols + 1 or cs[0] != 0:
            raise ConstructionError("col_start must have n_cols+1 entries starting at 0")
        if np.any(np.diff(cs) < 0):
            raise ConstructionError("col_start must be non-decreasing")
        if cs[-1] != len(ri) or len(ri) != len(self.nzval):
            raise ConstructionError("col_start[-1], len(row_idx) and len(nzval) disagree")
        if len(ri) and (ri.min() < 0 or ri.max() >= self.n_rows):
            raise ConstructionError("row index out of range")
        if not _rows_strictly_sorted(cs, ri):
            raise ConstructionError("row indices must be strictly increasing within a column")

    def same_pattern(self, other: "CscMatrix") -> bool:
        return (
            self.shape == other.shape
            and (self.col_start is other.col_start or np.array_equal(self.col_start, other.col_start))
            and (self.row_idx is other.row_idx or np.array_equal(self.row_idx, other.row_idx))
        )

    def col_indices(self) -> np.ndarray:
        """Column index of every stored entry."""
        return np.repeat(np.arange(self.n_cols, dtype=np.int64), np.diff(self.col_start))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=self.nzval.dtype)
        np.add.at(out, (self.row_idx, self.col_indices()), self.nzval)
        return out

    def copy(self) -> "CscMatrix":
        return CscMatrix(self.n_rows, self.n_cols, self.col_start.copy(),
                         self.row_idx.copy(), self.nzval.copy())

    @classmethod
    def from_dense(cls, dense, keep_zeros: bool = False) -> "CscMatrix":
        """Build from a 2-D array; zeros are dropped unless ``keep_zeros``."""
        dense = np.asarray(dense)
        mask = np.ones(dense.shape, dtype=bool) if keep_zeros else dense != 0
        cols, rows = np.nonzero(mask.T)
        col_start = np.zeros(dense.shape[1] + 1, dtype=np.int64)
        np.cumsum(np.bincount(cols, minlength=dense.shape[1]), out=col_start[1:])
        return cls(dense.shape[0], dense.shape[1], col_start,
                   rows.astype(np.int64), dense[rows, cols].copy())


@dataclass
class TripletList:
    """Coordinate list; duplicates are allowed and sum on compression."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    n_rows: int
    n_cols: int

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals)
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise ConstructionError("rows, cols and vals must have equal length")


@nb.njit(cache=True)
def _rows_strictly_sorted(col_start, row_idx):
    for j in range(len(col_start) - 1):
        for k in range(col_start[j] + 1, col_start[j + 1]):
            if row_idx[k] <= row_idx[k - 1]:
                return False
    return True


@nb.njit(cache=True)
def _compress(rows, cols, vals, n_rows, n_cols):
    nt = len(rows)
    # stable counting sort by row, then by column: rows end up ascending
    # within each column and duplicates stay in input order
    rcount = np.zeros(n_rows + 1, dtype=np.int64)
    for t in range(nt):
        rcount[rows[t] + 1] += 1
    for i in range(n_rows):
        rcount[i + 1] += rcount[i]
    by_row = np.empty(nt, dtype=np.int64)
    for t in range(nt):
        by_row[rcount[rows[t]]] = t
        rcount[rows[t]] += 1

    ccount = np.zeros(n_cols + 1, dtype=np.int64)
    for t in range(nt):
        ccount[cols[t] + 1] += 1
    for j in range(n_cols):
        ccount[j + 1] += ccount[j]
    order = np.empty(nt, dtype=np.int64)
    for s in range(nt):
        t = by_row[s]
        order[ccount[cols[t]]] = t
        ccount[cols[t]] += 1

    col_start = np.zeros(n_cols + 1, dtype=np.int64)
    row_idx = np.empty(nt, dtype=np.int64)
    nzval = np.zeros(nt, dtype=vals.dtype)
    nnz = 0
    pos = 0
    for j in range(n_cols):
        col_start[j] = nnz
        end = ccount[j]
        last_row = -1
        while pos < end:
            t = order[pos]
            if rows[t] == last_row:
                nzval[nnz - 1] += vals[t]
            else:
                row_idx[nnz] = rows[t]
                nzval[nnz] = vals[t]
                last_row = rows[t]
                nnz += 1
            pos += 1
    col_start[n_cols] = nnz
    return col_start, row_idx[:nnz].copy(), nzval[:nnz].copy()


def csc_from_triplets(t: TripletList) -> CscMatrix:
    """Compress coordinates to CSC, summing duplicates in input order."""
    if t.n_rows < 0 or t.n_cols < 0:
        raise ConstructionError("negative dimensions")
    if len(t.rows) and (
        t.rows.min() < 0 or t.rows.max() >= t.n_rows
        or t.cols.min() < 0 or t.cols.max() >= t.n_cols
    ):
        raise ConstructionError("triplet coordinate out of range")
    vals = t.vals if t.vals.dtype.kind in "fc" else t.vals.astype(np.float64)
    col_start, row_idx, nzval = _compress(t.rows, t.cols, vals, t.n_rows, t.n_cols)
    return CscMatrix(t.n_rows, t.n_cols, col_start, row_idx, nzval)


@nb.njit(cache=True)
def _spmv_into(col_start, row_idx, nzval, x, y):
    y[:] = 0.0
    for j in range(len(col_start) - 1):
        xj = x[j]
        for k in range(col_start[j], col_start[j + 1]):
            y[row_idx[k]] += nzval[k] * xj


def spmv_complex(a: CscMatrix, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """``a @ x`` accumulated column by column over the stored entries."""
    x = np.asarray(x)
    if x.ndim != 1 or len(x) != a.n_cols:
        raise DomainError(f"vector length {x.shape} does not match {a.n_cols} columns")
    if out is None:
        out = np.empty(a.n_rows, dtype=np.complex128)
    _spmv_into(a.col_start, a.row_idx, a.nzval, x.astype(np.complex128, copy=False), out)
    return out


@nb.njit(cache=True)
def _concat4(cs11, ri11, v11, cs12, ri12, v12, cs21, ri21, v21, cs22, ri22, v22,
             top_rows, left_cols, right_cols):
    nnz = len(v11) + len(v12) + len(v21) + len(v22)
    col_start = np.empty(left_cols + right_cols + 1, dtype=np.int64)
    row_idx = np.empty(nnz, dtype=np.int64)
    nzval = np.empty(nnz, dtype=v11.dtype)
    p = 0
    for c in range(left_cols + right_cols):
        col_start[c] = p
        if c < left_cols:
            j = c
            cs_t, ri_t, v_t, cs_b, ri_b, v_b = cs11, ri11, v11, cs21, ri21, v21
        else:
            j = c - left_cols
            cs_t, ri_t, v_t, cs_b, ri_b, v_b = cs12, ri12, v12, cs22, ri22, v22
        for k in range(cs_t[j], cs_t[j + 1]):
            row_idx[p] = ri_t[k]
            nzval[p] = v_t[k]
            p += 1
        for k in range(cs_b[j], cs_b[j + 1]):
            row_idx[p] = ri_b[k] + top_rows
            nzval[p] = v_b[k]
            p += 1
    col_start[left_cols + right_cols] = p
    return col_start, row_idx, nzval


def concat4(a11: CscMatrix, a12: CscMatrix, a21: CscMatrix, a22: CscMatrix) -> CscMatrix:
    """Block matrix ``[[a11, a12], [a21, a22]]`` as a freshly allocated CSC."""
    if (a11.n_rows != a12.n_rows or a21.n_rows != a22.n_rows
            or a11.n_cols != a21.n_cols or a12.n_cols != a22.n_cols):
        raise DomainError("blocks are not conformable")
    dtype = np.result_type(a11.dtype, a12.dtype, a21.dtype, a22.dtype)
    vals = [m.nzval.astype(dtype, copy=False) for m in (a11, a12, a21, a22)]
    col_start, row_idx, nzval = _concat4(
        a11.col_start, a11.row_idx, vals[0], a12.col_start, a12.row_idx, vals[1],
        a21.col_start, a21.row_idx, vals[2], a22.col_start, a22.row_idx, vals[3],
        a11.n_rows, a11.n_cols, a12.n_cols,
    )
    return CscMatrix(a11.n_rows + a21.n_rows, a11.n_cols + a12.n_cols, col_start, row_idx, nzval)


def pattern_clone_with_values(a: CscMatrix, fill=0.0, dtype=None) -> CscMatrix:
    """New matrix sharing ``a``'s structure arrays with a fresh ``nzval``.

    ``fill`` is a scalar broadcast to every entry or an array of length nnz.
    """
    fill = np.asarray(fill)
    if dtype is None:
        dtype = np.result_type(a.dtype, fill.dtype) if fill.ndim == 0 else fill.dtype
    nzval = np.empty(a.nnz, dtype=dtype)
    if fill.ndim and fill.shape != (a.nnz,):
        raise DomainError(f"fill has shape {fill.shape}, expected ({a.nnz},)")
    nzval[:] = fill
    return CscMatrix(a.n_rows, a.n_cols, a.col_start, a.row_idx, nzval)
