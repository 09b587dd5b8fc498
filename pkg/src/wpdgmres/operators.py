"""Apply-only operators and the preconditioners H used by the solver.

Every ``apply`` accepts either a single vector of length ``dim`` or a block
of shape ``(dim, k)`` holding one vector per column.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolation, NotPositiveDefiniteError
from .linalg import as_csr, sparse_cholesky


@dataclass(frozen=True)
class LinearOperator:
    dim: int
    apply: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    claims_hpd: bool = False
    label: str = ""
    # x -> H^{-1} x when cheaply available (identity, inverse of M)
    apply_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    # backing object, e.g. the SchwarzPreconditioner
    source: object = field(default=None, repr=False, compare=False)

    def __matmul__(self, x):
        return self.apply(x)

    def to_dense(self):
        return np.asarray(self.apply(np.eye(self.dim)))


def matrix_op(A, label="matrix", claims_hpd=False):
    """Wrap a sparse or dense matrix as a LinearOperator."""
    if sp.issparse(A):
        A = as_csr(A)
    else:
        A = np.asarray(A, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation("operator matrix must be square")
    return LinearOperator(A.shape[0], lambda x: A @ x, claims_hpd, label)


def identity_op(n):
    if n < 1:
        raise ContractViolation("dimension must be at least 1")
    return LinearOperator(n, lambda x: np.array(x, dtype=np.float64), True, "identity",
                          apply_inverse=lambda x: np.array(x, dtype=np.float64))


def inverse_hermitian_op(M):
    """H = M^{-1}, applied through a sparse Cholesky factor of M."""
    factor = sparse_cholesky(M)
    Mc = factor.matrix
    return LinearOperator(factor.n, factor.apply_inverse, True, "inv_hermitian",
                          apply_inverse=lambda x: Mc @ x)


def check_linearity(op, rng=None, scale=None):
    rng = np.random.default_rng(rng)
    x = rng.standard_normal(op.dim)
    y = rng.standard_normal(op.dim)
    lhs = op.apply(x + y) - op.apply(x) - op.apply(y)
    if scale is None:
        scale = max(np.linalg.norm(op.apply(x)), np.linalg.norm(op.apply(y)), 1.0)
    return float(np.linalg.norm(lhs)) <= 1e-12 * scale


# -- domain decomposition ---------------------------------------------------

def grid_adjacency(nx, ny):
    """Vertex adjacency of the structured P1 triangulation on an nx-by-ny grid.

    Neighbours are the four axis directions plus the (+1,+1)/(-1,-1)
    diagonal along which every cell is split.
    """
    idx = np.arange(nx * ny).reshape(ny, nx)
    rows, cols = [], []
    for dx, dy in ((1, 0), (0, 1), (1, 1)):
        a = idx[: ny - dy, : nx - dx].ravel()
        b = idx[dy:, dx:].ravel()
        rows += [a, b]
        cols += [b, a]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    G = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(nx * ny, nx * ny))
    return as_csr(G + sp.eye(nx * ny))


def _factor_counts(n_subdomains, nx, ny):
    # most square px * py = n_subdomains, wider axis gets the larger count
    best = None
    for px in range(1, n_subdomains + 1):
        if n_subdomains % px:
            continue
        py = n_subdomains // px
        score = abs(px / nx - py / ny)
        if best is None or score < best[0]:
            best = (score, px, py)
    return best[1], best[2]


def grow_overlap(index_set, adjacency, layers):
    """Add ``layers`` rings of graph neighbours to an index set."""
    n = adjacency.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[index_set] = True
    for _ in range(layers):
        mask = (adjacency @ mask.astype(np.float64)) > 0
    return np.flatnonzero(mask)


def partition_structured(shape, n_subdomains, overlap=1, adjacency=None):
    """Split an ``(nx, ny)`` grid of unknowns into overlapping rectangles.

    Unknown ``(i, j)`` has index ``j * nx + i``.  Each rectangle of the
    ``px x py`` block partition is grown by ``overlap`` layers of the
    adjacency graph (the P1 grid graph when none is given).  Returns a list
    of sorted index arrays, one per subdomain.
    """
    nx, ny = shape
    if n_subdomains < 1:
        raise ConfigurationError("need at least one subdomain")
    if overlap < 0:
        raise ConfigurationError("overlap must be non-negative")
    px, py = _factor_counts(n_subdomains, nx, ny)
    if px > nx or py > ny:
        raise ConfigurationError(
            f"{n_subdomains} subdomains ({px}x{py}) leave some subdomain empty on a {nx}x{ny} grid")
    if adjacency is None:
        adjacency = grid_adjacency(nx, ny)
    xs = np.array_split(np.arange(nx), px)
    ys = np.array_split(np.arange(ny), py)
    parts = []
    for yb in ys:
        for xb in xs:
            core = (yb[:, None] * nx + xb[None, :]).ravel()
            if core.size == 0:
                raise ConfigurationError("empty subdomain")
            parts.append(grow_overlap(core, adjacency, overlap))
    return parts


def partition_contiguous(adjacency, n_subdomains, overlap=1):
    """Fallback partition for matrices without grid information."""
    n = adjacency.shape[0]
    if n_subdomains < 1 or n_subdomains > n:
        raise ConfigurationError(f"cannot split {n} unknowns into {n_subdomains} subdomains")
    return [grow_overlap(block, adjacency, overlap)
            for block in np.array_split(np.arange(n), n_subdomains)]


def multiplicity(restrictions, n):
    counts = np.zeros(n)
    for idx in restrictions:
        counts[idx] += 1
    return counts


def pou_coarse_vectors(restrictions, n):
    """Partition-of-unity coarse space: one vector per subdomain.

    Row s is ``D_s R_s^T 1`` with multiplicity scaling, so the rows sum to
    the constant vector.
    """
    mult = multiplicity(restrictions, n)
    R0 = np.zeros((len(restrictions), n))
    for s, idx in enumerate(restrictions):
        R0[s, idx] = 1.0 / mult[idx]
    return R0


@dataclass(frozen=True)
class SchwarzPreconditioner:
    restrictions: list
    local_factors: list = field(repr=False)
    coarse_rows: Optional[np.ndarray] = field(default=None, repr=False)
    coarse_factor: Optional[object] = field(default=None, repr=False)
    M: sp.csr_matrix = field(default=None, repr=False)

    @property
    def n(self):
        return self.M.shape[0]

    def _one_level(self, v):
        out = np.zeros_like(v)
        for idx, fac in zip(self.restrictions, self.local_factors):
            out[idx] += fac.apply_inverse(v[idx])
        return out

    def _coarse_solve(self, v):
        R0 = self.coarse_rows
        return R0.T @ scipy.linalg.cho_solve(self.coarse_factor, R0 @ v, check_finite=False)

    def apply(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[0] != self.n:
            raise ContractViolation("vector length does not match preconditioner")
        if self.coarse_rows is None:
            return self._one_level(v)
        # Pi^T v = v - M R0^T E0^{-1} R0 v ; Pi w = w - R0^T E0^{-1} R0 M w
        coarse_v = self._coarse_solve(v)
        w = self._one_level(v - self.M @ coarse_v)
        return w - self._coarse_solve(self.M @ w) + coarse_v


def build_schwarz(M, restrictions, coarse=None):
    """Assemble an additive Schwarz preconditioner (see additive_schwarz_op)."""
    M = as_csr(M)
    n = M.shape[0]
    covered = multiplicity(restrictions, n)
    if np.any(covered == 0):
        raise ConfigurationError(
            f"{int(np.sum(covered == 0))} unknowns belong to no subdomain")
    factors = []
    for s, idx in enumerate(restrictions):
        try:
            factors.append(sparse_cholesky(M[idx][:, idx]))
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(
                f"local block of subdomain {s} is not positive definite: {exc}", subdomain=s) from None
    rows = cfac = None
    if coarse is not None:
        rows = pou_coarse_vectors(restrictions, n) if isinstance(coarse, str) and coarse == "pou" \
            else np.atleast_2d(np.asarray(coarse, dtype=np.float64))
        if rows.shape[1] != n:
            raise ContractViolation(f"coarse vectors must have length {n}")
        if np.linalg.matrix_rank(rows) < rows.shape[0]:
            raise ContractViolation("coarse vectors are linearly dependent")
        E0 = rows @ (M @ rows.T)
        E0 = 0.5 * (E0 + E0.T)
        try:
            cfac = scipy.linalg.cho_factor(E0, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("coarse block is not positive definite") from None
    return SchwarzPreconditioner(list(restrictions), factors, rows, cfac, M)


def additive_schwarz_op(M, restrictions, coarse=None):
    """One-level additive Schwarz, optionally with a coarse correction.

    Without coarse space: ``H v = sum_s R_s^T (R_s M R_s^T)^{-1} R_s v``.
    With coarse rows R0: ``H = Pi H1 Pi^T + R0^T E0^{-1} R0`` where
    ``E0 = R0 M R0^T`` and ``Pi = I - R0^T E0^{-1} R0 M``.

    ``coarse`` may be None, ``"pou"`` (partition-of-unity vectors) or an
    array of coarse vectors, one per row.
    """
    pre = build_schwarz(M, restrictions, coarse)
    label = "schwarz" if pre.coarse_rows is None else "schwarz+coarse"
    return LinearOperator(pre.n, pre.apply, True, label, source=pre)


@dataclass
class HpdReport:
    n_samples: int
    max_asymmetry: float
    min_rayleigh: float
    symmetric: bool
    positive: bool

    @property
    def passed(self):
        return self.symmetric and self.positive


def verify_hpd(op, n_samples=20, seed=0, rtol=1e-12):
    """Probabilistic symmetry and positivity check of an operator."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((op.dim, n_samples))
    Y = rng.standard_normal((op.dim, n_samples))
    HX = np.asarray(op.apply(X))
    HY = np.asarray(op.apply(Y))
    lhs = np.einsum("ij,ij->j", HX, Y)
    rhs = np.einsum("ij,ij->j", X, HY)
    scale = np.linalg.norm(HX, axis=0) * np.linalg.norm(Y, axis=0) + \
        np.linalg.norm(X, axis=0) * np.linalg.norm(HY, axis=0)
    asym = np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)
    rayleigh = np.einsum("ij,ij->j", HX, X) / np.einsum("ij,ij->j", X, X)
    max_asym = float(asym.max()) if n_samples else 0.0
    min_ray = float(rayleigh.min()) if n_samples else np.inf
    return HpdReport(n_samples, max_asym, min_ray, max_asym <= rtol, min_ray > 0.0)
