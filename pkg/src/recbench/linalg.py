"""Sparse and dense matrix kernels.

CSR storage for binary document-item matrices, the item Gram
(co-occurrence) matrix, sparse-times-dense products, and a seeded
randomized truncated SVD (range sketch, power iterations, small dense
SVD). Dense matrices are plain 2-D float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError

# Dense allocations above this many elements (~1 GiB of float64) are refused.
MAX_DENSE_ELEMENTS = 2**27

_SVD_OVERSAMPLE = 10
_SVD_POWER_ITERATIONS = 4


def check_dense_capacity(n_rows: int, n_cols: int, what: str) -> None:
    """Raise CapacityError if an n_rows x n_cols dense array is over the cutoff."""
    if n_rows * n_cols > MAX_DENSE_ELEMENTS:
        raise CapacityError(
            f"{what} needs a {n_rows}x{n_cols} dense allocation "
            f"({n_rows * n_cols} elements); cutoff is {MAX_DENSE_ELEMENTS}"
        )


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """CSR pattern matrix; row j holds the sorted column indices of its ones."""

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if row_ptr.shape != (self.n_rows + 1,) or row_ptr[0] != 0:
            raise ValueError("row_ptr must have n_rows+1 entries and start at 0")
        if np.any(np.diff(row_ptr) < 0) or row_ptr[-1] != col_idx.size:
            raise ValueError("row_ptr must be monotone and end at nnz")
        if col_idx.size:
            if col_idx.min() < 0 or col_idx.max() >= self.n_cols:
                raise ValueError("column index out of range")
            if col_idx.size > 1:
                diffs = np.diff(col_idx)
                # positions crossing a row boundary are exempt from the sort check
                within = np.ones(diffs.size, dtype=bool)
                boundaries = row_ptr[1:-1]
                boundaries = boundaries[(boundaries > 0) & (boundaries < col_idx.size)]
                within[boundaries - 1] = False
                if np.any(diffs[within] <= 0):
                    raise ValueError("column indices must be sorted and unique per row")

    @classmethod
    def from_rows(cls, rows, n_cols: int) -> "SparseBinaryMatrix":
        """Build from per-row column-index iterables (sorted and deduplicated)."""
        row_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks = []
        for j, cols in enumerate(rows):
            arr = np.unique(np.asarray(list(cols), dtype=np.int64))
            chunks.append(arr)
            row_ptr[j + 1] = row_ptr[j] + arr.size
        col_idx = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
        return cls(len(rows), n_cols, row_ptr, col_idx)

    @classmethod
    def from_dense(cls, dense) -> "SparseBinaryMatrix":
        dense = np.asarray(dense)
        rows = [np.flatnonzero(dense[j]) for j in range(dense.shape[0])]
        return cls.from_rows(rows, dense.shape[1])

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    def row_cols(self, j: int) -> np.ndarray:
        return self.col_idx[self.row_ptr[j]:self.row_ptr[j + 1]]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def to_dense(self) -> np.ndarray:
        check_dense_capacity(self.n_rows, self.n_cols, "densifying a sparse matrix")
        out = np.zeros((self.n_rows, self.n_cols))
        if self.nnz:
            rows = np.repeat(np.arange(self.n_rows), self.row_nnz())
            out[rows, self.col_idx] = 1.0
        return out

    def gather_rows(self, idx) -> np.ndarray:
        """Dense float64 copies of the selected rows (minibatch extraction)."""
        idx = np.asarray(idx, dtype=np.int64)
        check_dense_capacity(idx.size, self.n_cols, "gathering dense rows")
        out = np.zeros((idx.size, self.n_cols))
        for i, j in enumerate(idx):
            out[i, self.row_cols(int(j))] = 1.0
        return out


def gram(x: SparseBinaryMatrix) -> np.ndarray:
    """Item co-occurrence matrix X^T.X of a binary CSR matrix.

    Entry (j, k) counts the rows containing both j and k; the diagonal
    keeps each item's occurrence count. Symmetric by construction.
    """
    if x.n_rows == 0 or x.n_cols == 0:
        raise ValueError("gram requires a non-empty matrix")
    check_dense_capacity(x.n_cols, x.n_cols, "item co-occurrence matrix")
    c = np.zeros((x.n_cols, x.n_cols))
    for j in range(x.n_rows):
        cols = x.row_cols(j)
        if cols.size:
            c[np.ix_(cols, cols)] += 1.0
    return c


def spmm(x: SparseBinaryMatrix, d: np.ndarray) -> np.ndarray:
    """Exact product of a binary CSR matrix with a dense matrix."""
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or x.n_cols != d.shape[0]:
        raise ValueError(
            f"shape mismatch: sparse {x.n_rows}x{x.n_cols} @ dense {d.shape}"
        )
    out = np.zeros((x.n_rows, d.shape[1]))
    for j in range(x.n_rows):
        cols = x.row_cols(j)
        if cols.size:
            out[j] = d[cols].sum(axis=0)
    return out


@dataclass(frozen=True)
class SvdFactors:
    """Truncated factorization U.diag(sigma).Vt with sigma sorted descending."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def truncated_svd(m: np.ndarray, k: int, seed: int) -> SvdFactors:
    """Best rank-k factors of a dense matrix via randomized subspace iteration.

    Range sketch of k + 10 columns, 4 power iterations with QR
    re-orthonormalization, then an exact SVD of the small projected matrix.
    Deterministic under the seed; each component's sign is fixed so the
    largest-magnitude entry of its right singular vector is positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("truncated_svd expects a 2-D matrix")
    n_rows, n_cols = m.shape
    if not 1 <= k <= min(n_rows, n_cols):
        raise ValueError(f"rank k={k} out of range for a {n_rows}x{n_cols} matrix")
    rng = np.random.default_rng(seed)
    width = min(k + _SVD_OVERSAMPLE, min(n_rows, n_cols))
    sketch = rng.standard_normal((n_cols, width))
    q, _ = np.linalg.qr(m @ sketch)
    for _ in range(_SVD_POWER_ITERATIONS):
        w, _ = np.linalg.qr(m.T @ q)
        q, _ = np.linalg.qr(m @ w)
    ub, sigma, vt = np.linalg.svd(q.T @ m, full_matrices=False)
    u = (q @ ub)[:, :k]
    sigma = sigma[:k]
    vt = vt[:k]
    flip = vt[np.arange(k), np.argmax(np.abs(vt), axis=1)] < 0
    u = np.where(flip[np.newaxis, :], -u, u)
    vt = np.where(flip[:, np.newaxis], -vt, vt)
    return SvdFactors(u=u, sigma=sigma, vt=vt)
