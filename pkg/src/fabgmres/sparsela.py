"""Sparse matrix core: CSR storage, Matrix Market I/O, products and the Gram matrix.

Kaczmarz-type sweeps touch one row at a time, so the operator is kept in CSR
form with its squared row norms cached. The Gram matrix ``C = A A^T`` is
built once and kept either dense or as sparse columns depending on how full
it turns out to be.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    AllRowsZero,
    DimensionMismatch,
    IndexOutOfRange,
    ParseError,
    UnsupportedFormat,
)

GRAM_DENSE_THRESHOLD = 0.25


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix with sorted, duplicate-free, nonzero entries.

    Use :meth:`from_coo`, :meth:`from_dense` or :meth:`from_scipy` rather than
    the raw constructor; they enforce the storage invariants.
    """

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_coo(cls, rows, cols, vals, shape, meta=None) -> "SparseMatrix":
        m, n = int(shape[0]), int(shape[1])
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise IndexOutOfRange(f"entry index outside a {m}x{n} matrix")
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(m, n))
        return cls.from_scipy(coo, meta=meta)

    @classmethod
    def from_dense(cls, dense, meta=None) -> "SparseMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        return cls.from_scipy(sp.csr_matrix(dense), meta=meta)

    @classmethod
    def from_scipy(cls, mat, meta=None) -> "SparseMatrix":
        csr = sp.csr_matrix(mat, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        m, n = csr.shape
        return cls(
            nrows=m,
            ncols=n,
            row_ptr=csr.indptr.astype(np.int64),
            col_idx=csr.indices.astype(np.int64),
            values=csr.data.astype(np.float64),
            meta=dict(meta or {}),
        )

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    # -- derived quantities -------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def density(self) -> float:
        return self.nnz / (self.nrows * self.ncols)

    @cached_property
    def row_norms_sq(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.nrows), self.row_nnz)
        return np.bincount(rows, weights=self.values * self.values, minlength=self.nrows).astype(np.float64)

    @cached_property
    def row_norms_cumsum(self) -> np.ndarray:
        """Prefix sums of the squared row norms, used for norm-weighted row sampling."""
        return np.cumsum(self.row_norms_sq)

    @property
    def frobenius_sq(self) -> float:
        return float(self.row_norms_cumsum[-1]) if self.nrows else 0.0

    @cached_property
    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def transpose(self) -> "SparseMatrix":
        meta = dict(self.meta)
        meta["transposed"] = not meta.get("transposed", False)
        return SparseMatrix.from_scipy(self._csr.T, meta=meta)

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()


# ---------------------------------------------------------------------------
# products


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.ncols,):
        raise DimensionMismatch(f"matvec: expected vector of length {A.ncols}, got {x.shape}")
    return A._csr @ x


def matvec_transpose(A: SparseMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.nrows,):
        raise DimensionMismatch(f"matvec_transpose: expected vector of length {A.nrows}, got {y.shape}")
    return A._csr.T @ y


def row_dot(A: SparseMatrix, i: int, x: np.ndarray) -> float:
    cols, vals = A.row(i)
    return float(vals @ x[cols])


# ---------------------------------------------------------------------------
# zero rows


def drop_zero_rows(A: SparseMatrix) -> tuple[SparseMatrix, np.ndarray]:
    """Remove empty rows. Returns the reduced matrix and the kept original row indices."""
    kept = np.flatnonzero(A.row_nnz > 0)
    if kept.size == 0:
        raise AllRowsZero(f"all {A.nrows} rows of the matrix are empty")
    meta = dict(A.meta)
    meta.setdefault("rows_before_zero_row_removal", A.nrows)
    meta["zero_rows_removed"] = int(A.nrows - kept.size) + int(A.meta.get("zero_rows_removed", 0))
    if kept.size == A.nrows:
        return SparseMatrix(A.nrows, A.ncols, A.row_ptr, A.col_idx, A.values, meta), kept
    return SparseMatrix.from_scipy(A._csr[kept], meta=meta), kept


# ---------------------------------------------------------------------------
# Gram matrix


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``C = A A^T``, stored dense or as sparse columns.

    Because ``C`` is symmetric, column ``i`` equals row ``i``; the sparse mode
    therefore reuses CSR arrays as CSC columns.
    """

    order: int
    density: float
    dense: np.ndarray | None = None
    col_ptr: np.ndarray | None = None
    row_idx: np.ndarray | None = None
    data: np.ndarray | None = None

    @property
    def is_dense(self) -> bool:
        return self.dense is not None

    def column(self, i: int) -> np.ndarray:
        if self.is_dense:
            return self.dense[i].copy()
        out = np.zeros(self.order)
        lo, hi = self.col_ptr[i], self.col_ptr[i + 1]
        out[self.row_idx[lo:hi]] = self.data[lo:hi]
        return out

    def entry(self, i: int, j: int) -> float:
        if self.is_dense:
            return float(self.dense[i, j])
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        k = np.searchsorted(self.row_idx[lo:hi], i)
        if k < hi - lo and self.row_idx[lo + k] == i:
            return float(self.data[lo + k])
        return 0.0

    @cached_property
    def diag(self) -> np.ndarray:
        if self.is_dense:
            return np.diag(self.dense).copy()
        return np.array([self.entry(i, i) for i in range(self.order)])

    def diagonal(self) -> np.ndarray:
        return self.diag.copy()

    def column_nnz(self, i: int) -> int:
        if self.is_dense:
            return self.order
        return int(self.col_ptr[i + 1] - self.col_ptr[i])

    def to_dense(self) -> np.ndarray:
        if self.is_dense:
            return self.dense.copy()
        return sp.csc_matrix((self.data, self.row_idx, self.col_ptr), shape=(self.order, self.order)).toarray()


def gram(A: SparseMatrix, dense_threshold: float = GRAM_DENSE_THRESHOLD) -> GramMatrix:
    """Form ``A A^T`` once; dense storage when its density exceeds ``dense_threshold``."""
    csr = A._csr
    C = (csr @ csr.T).tocsc()
    C.eliminate_zeros()
    C.sort_indices()
    m = A.nrows
    density = C.nnz / float(m * m)
    if density > dense_threshold:
        dense = C.toarray()
        # exact symmetry; the sparse product can differ in the last bit between (i,j) and (j,i)
        dense = np.triu(dense) + np.triu(dense, 1).T
        return GramMatrix(order=m, density=density, dense=np.ascontiguousarray(dense))
    upper = sp.triu(C, format="csc")
    C = (upper + sp.triu(C, 1, format="csc").T).tocsc()
    C.sort_indices()
    return GramMatrix(
        order=m,
        density=density,
        col_ptr=C.indptr.astype(np.int64),
        row_idx=C.indices.astype(np.int64),
        data=C.data.astype(np.float64),
    )


# ---------------------------------------------------------------------------
# Matrix Market


def _parse_banner(line: str) -> tuple[str, str, str]:
    parts = line.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
        raise ParseError(f"bad Matrix Market banner: {line.strip()!r}")
    fmt, field_, symm = (p.lower() for p in parts[2:])
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown storage format {fmt!r}")
    if field_ in ("complex", "pattern"):
        raise UnsupportedFormat(f"{field_} matrices are not supported")
    if field_ not in ("real", "integer", "double"):
        raise ParseError(f"unknown field type {field_!r}")
    if symm not in ("general", "symmetric"):
        raise UnsupportedFormat(f"{symm} symmetry is not supported")
    if fmt == "array" and symm != "general":
        raise UnsupportedFormat("only general dense arrays are supported")
    return fmt, field_, symm


def load_matrix_market(path) -> SparseMatrix:
    """Read a real Matrix Market file into CSR.

    Duplicates are summed, explicit zeros dropped and symmetric storage
    expanded. ``%`` comment lines of the form ``key=value`` are kept in
    ``meta["header"]``.
    """
    path = Path(path)
    with path.open() as fh:
        banner = fh.readline()
        fmt, _, symm = _parse_banner(banner)
        header = {}
        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            text = line.lstrip("%").strip()
            if "=" in text:
                key, _, val = text.partition("=")
                header[key.strip()] = val.strip()
            line = fh.readline()
        if not line:
            raise ParseError("missing size line")
        body = fh.read()

    try:
        size = [int(t) for t in line.split()]
    except ValueError as exc:
        raise ParseError(f"bad size line: {line.strip()!r}") from exc
    try:
        tokens = np.array(body.split(), dtype=np.float64)
    except ValueError as exc:
        raise ParseError("non-numeric matrix entry") from exc

    meta = {"source": str(path), "header": header}
    if fmt == "array":
        if len(size) != 2:
            raise ParseError("array size line needs 2 integers")
        m, n = size
        if tokens.size != m * n:
            raise ParseError(f"expected {m * n} array entries, found {tokens.size}")
        return SparseMatrix.from_dense(tokens.reshape((n, m)).T, meta=meta)

    if len(size) != 3:
        raise ParseError("coordinate size line needs 3 integers")
    m, n, nz = size
    if tokens.size != 3 * nz:
        raise ParseError(f"expected {nz} coordinate entries, found {tokens.size / 3:g}")
    trip = tokens.reshape((nz, 3))
    rows = trip[:, 0]
    cols = trip[:, 1]
    if np.any(rows != np.floor(rows)) or np.any(cols != np.floor(cols)):
        raise ParseError("non-integer coordinate index")
    rows = rows.astype(np.int64) - 1
    cols = cols.astype(np.int64) - 1
    vals = trip[:, 2]
    if nz and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
        raise IndexOutOfRange(f"coordinate entry outside the declared {m}x{n} shape")
    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    A = SparseMatrix.from_coo(rows, cols, vals, (m, n), meta=meta)
    A.meta["zero_rows"] = int(np.sum(A.row_nnz == 0))
    return A


def write_matrix_market(path, A: SparseMatrix, header: dict | None = None) -> None:
    """Write ``A`` as ``coordinate real general`` with 17 significant digits."""
    path = Path(path)
    lines = ["%%MatrixMarket matrix coordinate real general"]
    for key, val in (header or {}).items():
        lines.append(f"% {key}={val}")
    lines.append(f"{A.nrows} {A.ncols} {A.nnz}")
    rows = np.repeat(np.arange(A.nrows), A.row_nnz)
    body = "\n".join(
        f"{r + 1} {c + 1} {v:.17g}" for r, c, v in zip(rows.tolist(), A.col_idx.tolist(), A.values.tolist())
    )
    path.write_text("\n".join(lines) + "\n" + body + ("\n" if body else ""))
