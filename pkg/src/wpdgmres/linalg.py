"""Sparse and small dense kernels used by every other module.

Sparse matrices are ``scipy.sparse.csr_matrix`` objects kept in canonical
form (sorted column indices, no duplicates, float64).  Vectors are 1-D
float64 arrays; blocks of vectors are 2-D arrays with one vector per column.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import (
    ContractViolation,
    HpdViolationError,
    NotPositiveDefiniteError,
    SingularCouplingError,
)

HPD_SLACK = 1e-12


def as_csr(A):
    """Return ``A`` as a canonical float64 CSR matrix."""
    A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(A):
    """Validate the CSR invariants; raise ContractViolation on failure."""
    n_rows, n_cols = A.shape
    offsets, cols = A.indptr, A.indices
    if len(offsets) != n_rows + 1 or offsets[0] != 0 or offsets[-1] != A.nnz:
        raise ContractViolation("row offsets inconsistent with nnz")
    if np.any(np.diff(offsets) < 0):
        raise ContractViolation("row offsets must be non-decreasing")
    if A.nnz and (cols.min() < 0 or cols.max() >= n_cols):
        raise ContractViolation("column index out of range")
    for i in range(n_rows):
        row = cols[offsets[i]:offsets[i + 1]]
        if np.any(np.diff(row) <= 0):
            raise ContractViolation(f"row {i}: column indices not strictly increasing")


def spmv(A, x):
    """y = A x, summing each row in ascending column order."""
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ContractViolation(
            f"dimension mismatch: matrix has {A.shape[1]} columns, vector has {x.shape[0]}")
    if not A.has_sorted_indices:
        A = as_csr(A)
    return A @ x


def _upper(A, k):
    return sp.triu(A, k=k, format="csr")


def split_hermitian_skew(A):
    """Split a square real matrix into symmetric and skew-symmetric parts.

    Only the upper triangle of each part is computed; the lower one is its
    mirror, so ``M == M.T`` and ``N == -N.T`` hold bit for bit and ``N`` has
    an exactly zero diagonal.
    """
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"matrix must be square, got {A.shape}")
    At = A.T.tocsr()
    sym_upper = _upper(0.5 * (A + At), 0)
    skew_upper = _upper(0.5 * (A - At), 1)
    diag = sp.diags(sym_upper.diagonal())
    M = as_csr(sym_upper + sym_upper.T - diag)
    N = as_csr(skew_upper - skew_upper.T)
    M.eliminate_zeros()
    N.eliminate_zeros()
    return M, N


def _apply(W, x):
    if hasattr(W, "apply"):
        return W.apply(x)
    if callable(W):
        return W(x)
    return W @ x


def w_inner(W, x, y):
    """<W x, y> for an hpd weight W (operator, matrix or callable)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractViolation(f"vector shapes differ: {x.shape} vs {y.shape}")
    if getattr(W, "dim", x.shape[0]) != x.shape[0]:
        raise ContractViolation("weight dimension does not match vectors")
    value = float(np.dot(_apply(W, x), y))
    if x is y or np.array_equal(x, y):
        if value < -HPD_SLACK * float(np.dot(x, x)):
            raise HpdViolationError(f"<Wx, x> = {value:.3e} < 0: weight is not hpd")
    return value


def w_norm(W, x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(max(w_inner(W, x, x), 0.0)))


@dataclass(frozen=True)
class DenseLU:
    """LU factorization (partial pivoting) of a small square block."""

    lu: np.ndarray
    piv: np.ndarray
    rcond: float
    n: int


def dense_lu_factor(E):
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ContractViolation(f"coupling block must be square, got shape {E.shape}")
    n = E.shape[0]
    if n == 0:
        return DenseLU(np.zeros((0, 0)), np.zeros(0, dtype=np.int32), 1.0, 0)
    if not np.all(np.isfinite(E)):
        raise ContractViolation("coupling block has non-finite entries")
    # lu_factor warns (not raises) on an exact zero pivot; check ourselves
    getrf, = scipy.linalg.lapack.get_lapack_funcs(("getrf",), (E,))
    lu, piv, info = getrf(E)
    if info > 0 or np.any(np.diag(lu) == 0.0):
        raise SingularCouplingError("coupling block is exactly singular")
    gecon, = scipy.linalg.lapack.get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(E, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    return DenseLU(lu, piv, float(rcond), n)


def dense_lu_solve(factor, rhs):
    rhs = np.asarray(rhs, dtype=np.float64)
    if factor.n == 0:
        return np.zeros_like(rhs)
    if rhs.shape[0] != factor.n:
        raise ContractViolation("right-hand side length does not match block size")
    return scipy.linalg.lu_solve((factor.lu, factor.piv), rhs)


@dataclass(frozen=True)
class CholeskyFactor:
    """Cholesky factor P M P^T = L L^T stored in LAPACK lower band form.

    ``perm`` is a reverse Cuthill-McKee ordering that keeps the band narrow;
    ``matrix`` is the (unpermuted) source matrix.
    """

    band: np.ndarray
    perm: np.ndarray
    n: int
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def bandwidth(self):
        return self.band.shape[0] - 1

    @property
    def L(self):
        """Lower-triangular factor as CSR (in the permuted ordering)."""
        n, u = self.n, self.bandwidth
        rows, cols, vals = [], [], []
        for d in range(u + 1):
            j = np.arange(n - d)
            rows.append(j + d)
            cols.append(j)
            vals.append(self.band[d, : n - d])
        L = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return as_csr(L)

    def apply_inverse(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ContractViolation("vector length does not match factor dimension")
        if self.n == 0:
            return v.copy()
        y = scipy.linalg.cho_solve_banded((self.band, True), v[self.perm], check_finite=False)
        out = np.empty_like(y)
        out[self.perm] = y
        return out


def is_symmetric(A, rtol=1e-12):
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 0.0
    return diff.nnz == 0 or diff.max() <= rtol * scale


def sparse_cholesky(M):
    """Factor a symmetric positive definite sparse matrix.

    Raises NotPositiveDefiniteError when a pivot is not positive, which makes
    this the positive-definiteness test used throughout the package.
    """
    M = as_csr(M)
    n = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise ContractViolation(f"matrix must be square, got {M.shape}")
    if not is_symmetric(M):
        raise ContractViolation("matrix is not symmetric")
    if n == 0:
        return CholeskyFactor(np.zeros((1, 0)), np.zeros(0, dtype=np.intp), 0, M)
    perm = np.asarray(reverse_cuthill_mckee(M, symmetric_mode=True), dtype=np.intp)
    Mp = M[perm][:, perm].tocoo()
    lower = Mp.row >= Mp.col
    r, c, v = Mp.row[lower], Mp.col[lower], Mp.data[lower]
    u = int((r - c).max()) if r.size else 0
    band = np.zeros((u + 1, n))
    band[r - c, c] = v
    if np.any(band[0] <= 0.0):
        raise NotPositiveDefiniteError("non-positive diagonal entry")
    try:
        cb = scipy.linalg.cholesky_banded(band, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    if not np.all(cb[0] > 0.0):
        raise NotPositiveDefiniteError("non-positive pivot")
    return CholeskyFactor(cb, perm, n, M)
