"""Generalized eigenproblem N z = lambda M z for M spd and N skew-symmetric.

All eigenvalues are purely imaginary, lambda = i*mu, and are stored through
the real number ``mu``.  For real input, nonzero eigenvalues come in
conjugate pairs (mu, z) / (-mu, conj(z)); the real and imaginary parts of
one member of each pair span the same real space as the pair, which is how
the real deflation basis is built.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    ContractViolation,
    NotEnoughEigenpairsError,
    NumericalFailureError,
    PartialConvergenceError,
)
from .linalg import as_csr, sparse_cholesky

DENSE_SIZE_CAP = 2000
ZERO_MU_RTOL = 1e-12


@dataclass(frozen=True)
class PencilEigenPair:
    mu: float
    vector: np.ndarray = field(repr=False)
    residual: float = 0.0
    m_norm_error: float = 0.0

    @property
    def eigenvalue(self):
        return 1j * self.mu


@dataclass(frozen=True)
class PencilEigenSet:
    pairs: list
    k: int
    # largest |mu| of the whole pencil when known (dense solve), else of the set
    rho: float = 0.0
    method: str = ""

    def __len__(self):
        return len(self.pairs)

    @property
    def mus(self):
        return np.array([p.mu for p in self.pairs])

    @property
    def vectors(self):
        if not self.pairs:
            return np.zeros((0, 0), dtype=complex)
        return np.column_stack([p.vector for p in self.pairs])

    @property
    def spectral_radius(self):
        return float(abs(self.pairs[0].mu)) if self.pairs else 0.0


class TauEstimate(NamedTuple):
    value: float
    exhausted: bool


def check_skew(N):
    N = as_csr(N)
    if N.shape[0] != N.shape[1]:
        raise ContractViolation("N must be square")
    S = N + N.T
    S.eliminate_zeros()
    if S.nnz:
        raise ContractViolation("N is not skew-symmetric")
    return N


def _phase_normalize(z):
    """Rotate z so that its largest entry (first one on ties) is real positive."""
    i = int(np.argmax(np.abs(z)))
    if abs(z[i]) == 0.0:
        return z
    return z * (abs(z[i]) / z[i])


def _real_complement(U_pos, dim):
    """Orthonormal real basis of the complement of span{Re U, Im U} in R^dim."""
    p = U_pos.shape[1]
    if 2 * p >= dim:
        return np.zeros((dim, 0))
    B = np.hstack([U_pos.real, U_pos.imag])
    if p == 0:
        return np.eye(dim)
    Q, _ = np.linalg.qr(B, mode="complete")
    return Q[:, 2 * p:]


def _assemble_set(mus_pos, Z_pos, Z_zero, k, M, N, rho, method):
    """Interleave (+mu, z), (-mu, conj z) pairs, then zero modes; keep top k."""
    pairs = []
    for mu, z in zip(mus_pos, Z_pos.T):
        z = _phase_normalize(z)
        pairs.append((mu, z))
        pairs.append((-mu, z.conj()))
    for z in Z_zero.T:
        pairs.append((0.0, z.astype(complex)))
    # keep conjugate partners together at the cut
    if k < len(pairs) and k % 2 == 1 and pairs[k - 1][0] > 0:
        k += 1
    out = []
    for mu, z in pairs[:k]:
        Mz = M @ z
        mnorm = float(np.real(np.vdot(z, Mz)))
        res = float(np.linalg.norm(N @ z - 1j * mu * Mz) / np.sqrt(max(mnorm, 1e-300)))
        out.append(PencilEigenPair(float(mu), z, res, abs(mnorm - 1.0)))
    return PencilEigenSet(out, k, float(rho), method)


def pencil_dense(N, M, k, size_cap=DENSE_SIZE_CAP):
    """Top-k eigenpairs by |mu| through a dense Cholesky congruence.

    With M = L L^T, the matrix S = L^{-1} N L^{-T} is real skew-symmetric, so
    -i*S is Hermitian with real eigenvalues mu; eigenvectors map back by
    z = L^{-T} u and come out M-orthonormal.
    """
    M = as_csr(M)
    N = check_skew(N)
    n = M.shape[0]
    if N.shape != M.shape:
        raise ContractViolation("M and N must have the same shape")
    if n > size_cap:
        raise ContractViolation(f"n = {n} exceeds the dense size cap {size_cap}")
    k = min(k, n)
    if k <= 0:
        return PencilEigenSet([], 0, 0.0, "dense")
    sparse_cholesky(M)  # spd check with a clear error
    L = scipy.linalg.cholesky(M.toarray(), lower=True)
    X = scipy.linalg.solve_triangular(L, N.toarray(), lower=True)
    S = scipy.linalg.solve_triangular(L, X.T, lower=True).T
    S = 0.5 * (S - S.T)
    mus, U = scipy.linalg.eigh(-1j * S)
    rho = float(np.max(np.abs(mus))) if n else 0.0
    thr = ZERO_MU_RTOL * rho
    order = np.argsort(-mus, kind="stable")
    pos = [i for i in order if mus[i] > thr]
    U_pos = U[:, pos]
    Z_pos = scipy.linalg.solve_triangular(L, U_pos, lower=True, trans="T")
    n_zero = max(k - 2 * len(pos), 0)
    if n_zero:
        U0 = _real_complement(U_pos, n)[:, :n_zero]
        Z_zero = scipy.linalg.solve_triangular(L, U0, lower=True, trans="T")
    else:
        Z_zero = np.zeros((n, 0))
    return _assemble_set(mus[pos], Z_pos, Z_zero, k, M, N, rho, "dense")


def _tridiag_ritz(betas):
    """Ritz pairs of the skew tridiagonal T with T[j+1, j] = beta_j.

    -i*T is unitarily similar, through D = diag((-i)^j), to the real
    symmetric tridiagonal with zero diagonal and off-diagonal beta.
    """
    j = len(betas) + 1
    theta, Sr = scipy.linalg.eigh_tridiagonal(np.zeros(j), np.asarray(betas), lapack_driver="stemr")
    d = (-1j) ** np.arange(j)
    return theta, d[:, None] * Sr


def pencil_lanczos(factor, N, k, tol=1e-10, max_iters=None, seed=0):
    """Top-k eigenpairs by |mu| with M-inner-product Lanczos on M^{-1} N.

    ``factor`` is the CholeskyFactor of M.  M^{-1} N is skew-adjoint for the
    M inner product, so the Lanczos projection is skew tridiagonal with a
    zero diagonal.  Full M-reorthogonalization is used.  A pair counts as
    converged once its Ritz residual beta_j*|s_last| drops below
    ``tol * rho``.
    """
    M = factor.matrix
    N = check_skew(N)
    n = factor.n
    if k <= 0:
        return PencilEigenSet([], 0, 0.0, "lanczos")
    k = min(k, n)
    if max_iters is None:
        max_iters = n
    max_iters = min(max_iters, n)
    rng = np.random.default_rng(seed)

    Q = np.zeros((n, max_iters + 1))
    MQ = np.zeros_like(Q)
    betas = []

    def m_orthonormalize(w, j):
        for _ in range(2):
            c = MQ[:, :j].T @ w
            w = w - Q[:, :j] @ c
        Mw = M @ w
        return w, Mw, float(np.sqrt(max(np.dot(w, Mw), 0.0)))

    q, Mq, nq = m_orthonormalize(rng.standard_normal(n), 0)
    Q[:, 0], MQ[:, 0] = q / nq, Mq / nq
    scale = 0.0
    n_conv = 0
    theta = Sc = None
    j = 0
    while True:
        w = factor.apply_inverse(N @ Q[:, j])
        w, Mw, beta = m_orthonormalize(w, j + 1)
        scale = max(scale, beta)
        j += 1
        breakdown = beta <= 1e-13 * max(scale, 1.0)
        done = j >= max_iters
        if breakdown and not done:
            # invariant subspace: restart from a fresh direction
            w, Mw, beta_new = m_orthonormalize(rng.standard_normal(n), j)
            if beta_new == 0.0:
                done = True
            else:
                Q[:, j], MQ[:, j] = w / beta_new, Mw / beta_new
                betas.append(0.0)
        elif not done:
            Q[:, j], MQ[:, j] = w / beta, Mw / beta
            betas.append(beta)
        last_beta = 0.0 if breakdown else beta
        if done or j % 5 == 0 or breakdown:
            theta, Sc = _tridiag_ritz(betas[: j - 1])
            order = np.argsort(-np.abs(theta), kind="stable")
            rho = float(np.max(np.abs(theta)))
            est = last_beta * np.abs(Sc[-1, :])
            conv = est <= tol * max(rho, np.finfo(float).tiny)
            n_conv = 0
            for i in order:
                if not conv[i]:
                    break
                n_conv += 1
            if n_conv >= k or done:
                break
    jdim = len(theta)
    thr = ZERO_MU_RTOL * rho
    order = np.argsort(-theta, kind="stable")
    pos = [i for i in order if theta[i] > thr]
    S_pos = Sc[:, pos]
    Z_pos = Q[:, :jdim] @ S_pos
    n_zero = max(k - 2 * len(pos), 0)
    Z_zero = Q[:, :jdim] @ _real_complement(S_pos, jdim)[:, :n_zero] if n_zero else np.zeros((n, 0))
    result = _assemble_set(theta[pos], Z_pos, Z_zero, min(k, jdim), M, N, rho, "lanczos")
    if n_conv < min(k, jdim) and jdim < n:
        good = PencilEigenSet(result.pairs[:n_conv], n_conv, result.rho, "lanczos")
        raise PartialConvergenceError(
            f"only {n_conv} of {k} eigenpairs converged in {j} iterations", good)
    return result


def solve_pencil(N, M, k, method="auto", factor=None, **kwargs):
    """Dispatch to the dense solver below the size cap, Lanczos above it."""
    n = M.shape[0]
    if method == "auto":
        method = "dense" if n < DENSE_SIZE_CAP else "lanczos"
    if method == "dense":
        return pencil_dense(N, M, k)
    if method == "lanczos":
        return pencil_lanczos(factor or sparse_cholesky(M), N, k, **kwargs)
    raise ContractViolation(f"unknown eigensolver method {method!r}")


def real_deflation_basis(eigs, m):
    """Real n-by-m basis [Re z_1..Re z_{m/2}, Im z_1..Im z_{m/2}].

    Uses the mu > 0 member of the m/2 leading conjugate pairs.
    """
    if m % 2:
        raise ContractViolation(f"deflation rank must be even, got {m}")
    if m < 0:
        raise ContractViolation("deflation rank must be non-negative")
    n = eigs.pairs[0].vector.shape[0] if eigs.pairs else 0
    if m == 0:
        return np.zeros((n, 0))
    reps = [p.vector for p in eigs.pairs if p.mu > 0][: m // 2]
    if len(reps) < m // 2:
        raise NotEnoughEigenpairsError(
            f"need {m // 2} conjugate pairs with mu > 0, the set has {len(reps)}")
    V = np.column_stack(reps)
    Z = np.hstack([V.real, V.imag])
    _, R, _ = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > max(Z.shape) * np.finfo(float).eps * diag[0]))
    if rank < m:
        raise NumericalFailureError(f"deflation basis has rank {rank} < {m}")
    return Z


def tau_of(eigs, m):
    """|mu| of the first eigenvalue left out of a rank-m deflation space."""
    if m < len(eigs.pairs):
        return TauEstimate(abs(eigs.pairs[m].mu), False)
    return TauEstimate(0.0, True)
