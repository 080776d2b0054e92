"""Sparse/dense linear algebra substrate.

The CSR container is a thin immutable wrapper around numpy arrays; products
and factorizations are delegated to scipy, whose CSR kernels sum each row in
stored (ascending column) order, so results are reproducible bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DROP_TOL = 1e-12
DENSE_LIMIT = 4000
MAX_DIRECT_DOFS = 20000


class DimensionError(ValueError):
    pass


class NotSPDError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Iteration failed to converge; ``estimate`` carries the best value so far."""

    def __init__(self, message, estimate=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix in canonical form.

    Column indices are strictly increasing within each row.  Instances are
    treated as immutable; the arrays are flagged read-only on construction.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _scipy: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if offsets.shape != (self.n_rows + 1,):
            raise DimensionError("row_offsets must have length n_rows + 1")
        if offsets[0] != 0 or offsets[-1] != cols.size or cols.size != vals.size:
            raise DimensionError("inconsistent CSR arrays")
        if np.any(np.diff(offsets) < 0):
            raise DimensionError("row_offsets must be nondecreasing")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise DimensionError("column index out of range")
        # strictly increasing columns inside every row
        if cols.size > 1:
            row_of = np.repeat(np.arange(self.n_rows), np.diff(offsets))
            same_row = row_of[1:] == row_of[:-1]
            if np.any((np.diff(cols) <= 0) & same_row):
                raise DimensionError("column indices must be strictly increasing per row")
        for arr in (offsets, cols, vals):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)
        mat = sp.csr_matrix((vals, cols, offsets), shape=(self.n_rows, self.n_cols))
        mat.has_sorted_indices = True
        object.__setattr__(self, "_scipy", mat)

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def to_scipy(self) -> sp.csr_matrix:
        return self._scipy

    def toarray(self) -> np.ndarray:
        return self._scipy.toarray()

    def diagonal(self) -> np.ndarray:
        return self._scipy.diagonal()

    def transpose(self) -> "CsrMatrix":
        return from_scipy(self._scipy.T.tocsr(), drop_tol=None)

    @property
    def T(self) -> "CsrMatrix":
        return self.transpose()

    def __matmul__(self, x):
        if isinstance(x, CsrMatrix):
            return from_scipy(self._scipy @ x._scipy, drop_tol=None)
        return spmv(self, x)


def from_scipy(mat, drop_tol: float | None = DROP_TOL) -> CsrMatrix:
    """Canonicalize any scipy sparse matrix (sum duplicates, sort, drop tiny entries)."""
    csr = sp.csr_matrix(mat, dtype=np.float64, copy=True)
    csr.sum_duplicates()
    csr.sort_indices()
    if drop_tol is not None and csr.nnz:
        scale = np.abs(csr.data).max()
        csr.data[np.abs(csr.data) <= drop_tol * scale] = 0.0
        csr.eliminate_zeros()
    return CsrMatrix(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)


def from_coo(rows, cols, vals, shape, drop_tol: float | None = DROP_TOL) -> CsrMatrix:
    """Build a canonical CSR matrix from triplets, summing duplicates."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=np.float64).ravel()
    # stable sort so duplicate accumulation order is schedule independent
    order = np.lexsort((cols, rows))
    coo = sp.coo_matrix((vals[order], (rows[order], cols[order])), shape=shape)
    return from_scipy(coo, drop_tol=drop_tol)


def from_dense(a, drop_tol: float | None = 0.0) -> CsrMatrix:
    return from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)), drop_tol=drop_tol)


def identity(n: int) -> CsrMatrix:
    return from_scipy(sp.identity(n, format="csr"), drop_tol=None)


def diags(d) -> CsrMatrix:
    return from_scipy(sp.diags(np.asarray(d, dtype=np.float64)).tocsr(), drop_tol=0.0)


def zeros(n_rows: int, n_cols: int) -> CsrMatrix:
    return CsrMatrix(n_rows, n_cols, np.zeros(n_rows + 1, np.int64),
                     np.zeros(0, np.int64), np.zeros(0))


def spmv(A: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.n_cols:
        raise DimensionError(f"cannot multiply {A.shape} matrix by vector of length {x.shape}")
    return A.to_scipy() @ x


def nnz(A: CsrMatrix) -> int:
    return int(A.col_indices.size)


def a_norm(A: CsrMatrix | None, s: int, v) -> float:
    """``sqrt(v^T A^s v)`` for ``s`` in {0, 1}; ``s=0`` is the Euclidean norm."""
    v = np.asarray(v, dtype=np.float64)
    if s == 0:
        return float(np.linalg.norm(v))
    if s != 1:
        raise ValueError("only s in {0, 1} is supported")
    q = float(v @ spmv(A, v))
    if q < 0.0:
        raise NotSPDError(f"negative quadratic form {q:.3e}; matrix is not SPD")
    return float(np.sqrt(q))


def power_iteration_symmetric(
    apply: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-6,
    max_iter: int = 5000,
    seed: int = 0,
) -> float:
    """Dominant eigenvalue magnitude of a symmetric operator.

    The Rayleigh quotient is tracked each step; iteration stops once it
    changes by less than ``tol`` (relative) over ``window`` consecutive steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    window = 10
    history = []
    for it in range(1, max_iter + 1):
        w = apply(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        history.append(abs(lam_new))
        lam = abs(lam_new)
        if len(history) > window:
            old = history[-1 - window]
            if abs(lam - old) <= tol * lam:
                return lam
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps", estimate=lam, iterations=max_iter
    )


class DirectSolver:
    """Factorization of a square sparse matrix for repeated exact solves.

    Small systems use a dense Cholesky factorization (LU if the matrix is not
    SPD); larger ones go through SuperLU.
    """

    def __init__(self, A: CsrMatrix, dense_limit: int = DENSE_LIMIT):
        if A.n_rows != A.n_cols:
            raise DimensionError("direct solve needs a square matrix")
        if A.n_rows > MAX_DIRECT_DOFS:
            raise ValueError(f"{A.n_rows} unknowns exceeds direct-solver cap {MAX_DIRECT_DOFS}")
        self.n = A.n_rows
        self.kind = "dense-cholesky"
        if self.n <= dense_limit:
            dense = A.toarray()
            try:
                self._fac = sla.cho_factor(dense, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                self.kind = "dense-lu"
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", sla.LinAlgWarning)
                    lu, piv = sla.lu_factor(dense, check_finite=False)
                if np.any(np.abs(np.diag(lu)) <= 1e-300):
                    raise SingularMatrixError("matrix is singular")
                self._fac = (lu, piv)
        else:
            self.kind = "superlu"
            try:
                self._fac = spla.splu(A.to_scipy().tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(str(exc)) from exc

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionError("right-hand side has wrong length")
        if self.kind == "dense-cholesky":
            return sla.cho_solve(self._fac, b, check_finite=False)
        if self.kind == "dense-lu":
            return sla.lu_solve(self._fac, b, check_finite=False)
        return self._fac.solve(b)


def direct_solve(A: CsrMatrix, b) -> np.ndarray:
    return DirectSolver(A).solve(b)


def write_matrix_market(A: CsrMatrix, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.n_rows} {A.n_cols} {nnz(A)}\n")
        for i in range(A.n_rows):
            lo, hi = A.row_offsets[i], A.row_offsets[i + 1]
            for j, v in zip(A.col_indices[lo:hi], A.values[lo:hi]):
                fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def read_matrix_market(path) -> CsrMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket matrix coordinate real general"):
        raise ValueError("unsupported Matrix Market header")
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("%")]
    n_rows, n_cols, count = (int(t) for t in body[0].split())
    if count:
        data = np.array([ln.split() for ln in body[1:1 + count]], dtype=np.float64)
        rows, cols, vals = data[:, 0].astype(np.int64) - 1, data[:, 1].astype(np.int64) - 1, data[:, 2]
    else:
        rows = cols = np.zeros(0, np.int64)
        vals = np.zeros(0)
    return from_coo(rows, cols, vals, (n_rows, n_cols), drop_tol=None)
