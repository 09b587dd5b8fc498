"""Convergence-bound diagnostics for weighted deflated GMRES.

With W = H hpd and A positive definite, each GMRES step reduces the squared
W-norm of the residual by at least the factor ``1 - theta``.  For a
spectral deflation space ``theta >= theta_th = 1/kappa(HM) * 1/(1 + tau^2)``
where tau is the largest pencil eigenvalue modulus left out of the space.
This module estimates the pieces of that bound and checks completed runs
against it.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .deflation import apply_PD, empty_pair
from .errors import ContractViolation, InsufficientDataError
from .gmres import _apply, theta_from_history

BOUND_SLACK = 1e-12
PI_NORM_A = np.pi * np.sqrt(1.8 ** 2 + 1.0)


class KappaEstimate(NamedTuple):
    lambda_min: float
    lambda_max: float
    iterations: int

    @property
    def kappa(self):
        return self.lambda_max / self.lambda_min


def estimate_kappa_HM(H, M, tol=1e-10, max_iter=200, seed=0, max_restarts=3):
    """Extreme eigenvalues of HM from preconditioned Lanczos on M.

    This is the Lanczos process hidden inside PCG for ``M x = b`` with
    preconditioner H: vectors ``w_j`` with ``z_j = H w_j`` are orthonormal
    in the ``<w, H w>`` inner product and the recurrence tridiagonal has
    the Ritz values of HM.  Full reorthogonalization is used.  The loop
    stops after ``max_iter`` steps or once both extreme Ritz values move
    by less than ``tol`` (relative) on two consecutive steps.  If the
    Krylov space becomes invariant, Lanczos restarts from a fresh random
    vector orthogonal to the previous ones (at most ``max_restarts`` times),
    so that e.g. H = M^{-1} still yields two Ritz values.
    """
    n = M.shape[0]
    if n < 2:
        raise InsufficientDataError("need at least a 2x2 problem for two Ritz values")
    rng = np.random.default_rng(seed)
    max_iter = min(max_iter, n)
    Wk = np.zeros((n, max_iter))   # w_j
    Zk = np.zeros((n, max_iter))   # z_j = H w_j
    alphas, betas = [], []

    def h_orth(u, j):
        for _ in range(2):
            u = u - Wk[:, :j] @ (Zk[:, :j].T @ u)
        z = _apply(H, u)
        return u, z, float(np.dot(u, z))

    def start(j):
        u, z, uz = h_orth(rng.standard_normal(n), j)
        if uz <= 0.0:
            return False
        s = np.sqrt(uz)
        Wk[:, j], Zk[:, j] = u / s, z / s
        return True

    start(0)
    restarts = 0
    prev = None
    stagnant = 0
    scale = 0.0
    j = 0
    while True:
        z = Zk[:, j]
        u = _apply(M, z)
        alphas.append(float(np.dot(z, u)))
        scale = max(scale, abs(alphas[-1]))
        u, zu, uz = h_orth(u, j + 1)
        beta = np.sqrt(max(uz, 0.0))
        j += 1
        theta = scipy.linalg.eigvalsh_tridiagonal(np.array(alphas), np.array(betas)) \
            if j > 1 else np.array(alphas)
        ext = (theta[0], theta[-1])
        if prev is not None and j >= 2:
            moved = max(abs(ext[0] - prev[0]) / abs(ext[0]), abs(ext[1] - prev[1]) / abs(ext[1]))
            stagnant = stagnant + 1 if moved < tol else 0
        prev = ext
        if j >= max_iter or stagnant >= 2:
            break
        if beta <= 1e-12 * max(scale, 1e-300):
            if restarts >= max_restarts or not start(j):
                break
            restarts += 1
            betas.append(0.0)
        else:
            Wk[:, j], Zk[:, j] = u / beta, zu / beta
            betas.append(beta)
    if j < 2:
        raise InsufficientDataError("Lanczos broke down before producing two Ritz values")
    lmin, lmax = float(theta[0]), float(theta[-1])
    if lmin <= 0.0:
        raise ContractViolation("non-positive Ritz value: H or M is not positive definite")
    return KappaEstimate(lmin, lmax, j)


def theta_th(kappa, tau):
    """Lower bound 1/kappa * 1/(1 + tau^2) for the per-step contraction."""
    if kappa < 1.0:
        if kappa < 1.0 - 1e-8:
            raise ContractViolation(f"condition number must be >= 1, got {kappa}")
        kappa = 1.0
    if tau < 0:
        raise ContractViolation("tau must be non-negative")
    return 1.0 / kappa / (1.0 + tau * tau)


def theta_exp(history):
    """Experimental contraction min_i 1 - (h_{i+1}/h_i)^2; nan if undefined."""
    return theta_from_history(history)


def theta_sampled(A, H, pair=None, n_samples=1000, seed=0, W=None, batch=250):
    """Minimum of the one-step quotient over random vectors of range(P_D).

    The quotient ``<q, y>_W^2 / (||q||_W^2 ||y||_W^2)`` with
    ``q = P_D A H y`` is evaluated for ``n_samples`` random y; W defaults
    to H.  Sampling an infimum can only overestimate it.
    """
    W = H if W is None else W
    n = A.shape[0] if not hasattr(A, "dim") else A.dim
    pair = pair or empty_pair(n, A)
    rng = np.random.default_rng(seed)
    best = np.inf
    done = 0
    while done < n_samples:
        s = min(batch, n_samples - done)
        Y = apply_PD(pair, rng.standard_normal((n, s)))
        Q = apply_PD(pair, _apply(A, _apply(H, Y)))
        WY = _apply(W, Y)
        WQ = _apply(W, Q)
        qy = np.einsum("ij,ij->j", WY, Q)
        qq = np.einsum("ij,ij->j", WQ, Q)
        yy = np.einsum("ij,ij->j", WY, Y)
        ok = (qq > 0) & (yy > 0)
        if np.any(ok):
            best = min(best, float(np.min(qy[ok] ** 2 / (qq[ok] * yy[ok]))))
        done += s
    return best


def rho_bound_pde(nu, c0, eta):
    """Mesh-independent bound on rho(M^{-1} N) for the model problem.

    The field is ``a = eta*pi*(-y - 0.8, x)`` on [-1, 1]^2, divergence free,
    with ``||a||_inf = eta*pi*sqrt(1.8^2 + 1)``; the bound is
    ``||a||_inf / (2 sqrt(nu c0))``.
    """
    if nu <= 0 or c0 <= 0:
        raise ContractViolation("nu and c0 must be positive")
    return abs(eta) * PI_NORM_A / (2.0 * np.sqrt(nu * c0))


@dataclass
class BoundReport:
    lambda_min_HM: float
    lambda_max_HM: float
    kappa_HM: float
    tau: float
    theta_th: float
    theta_exp: float
    theta_sampled: float
    bound_satisfied: bool
    # per-step check (h_i/h_{i-1})^2 <= 1 - theta_th for every pair
    steps_satisfied: bool = True
    worst_step: float = 0.0

    @property
    def passed(self):
        return self.bound_satisfied and self.steps_satisfied


def check_steps(history, th, slack=BOUND_SLACK):
    """Return (all_ok, worst) where worst = max_i (h_i/h_{i-1})^2 - (1 - th)."""
    h = np.asarray(history, dtype=np.float64)
    if h.size < 2:
        return True, -np.inf
    prev, nxt = h[:-1], h[1:]
    ok = prev > 0
    if not np.any(ok):
        return True, -np.inf
    excess = (nxt[ok] / prev[ok]) ** 2 - (1.0 - th)
    worst = float(np.max(excess))
    return worst <= slack, worst


def verify_run(A, M, H, pair, report, tau, kappa=None, n_samples=1000, seed=0):
    """Check a completed W = H run against the theoretical contraction bound.

    ``tau`` is the pencil modulus of the first eigenvalue not deflated and
    ``kappa`` an optional precomputed KappaEstimate (it only depends on H
    and M, so sweeps over deflation ranks can share it).  Violations are
    reported in the returned BoundReport, never raised.
    """
    est = kappa if kappa is not None else estimate_kappa_HM(H, M, seed=seed)
    th = theta_th(est.kappa, tau)
    te = report.theta_exp
    ts = theta_sampled(A, H, pair, n_samples=n_samples, seed=seed) if n_samples else float("nan")
    ok = bool(np.isnan(te) or th <= te + BOUND_SLACK)
    steps_ok, worst = check_steps(report.residual_history, th)
    return BoundReport(est.lambda_min, est.lambda_max, max(est.kappa, 1.0), float(tau), th, te,
                       ts, ok, steps_ok, worst)
