"""Weighted, right-preconditioned, deflated GMRES.

The weighted solver works on the projected system ``P_D A x~ = P_D b``
with right preconditioner H and inner product <W ., .>.  Iterates are kept
in the x variable, ``x_i = x_0 + sum_j y_j H v_j``, so the preconditioned
variable never appears.

The same Arnoldi/Givens engine drives the unweighted reference solver,
which runs Euclidean GMRES on the left-preconditioned ``H P_D A``.
"""
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .deflation import apply_PD, empty_pair, recombine
from .errors import ContractViolation, HpdViolationError, NumericalFailureError
from .linalg import dense_lu_solve

MODES = ("weighted_right", "unweighted_left")
STOP_NORMS = ("weighted", "euclidean_h")
REORTH_TRIGGER = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 1000
    restart: Optional[int] = None
    mode: str = "weighted_right"
    breakdown_eps: float = 1e-14
    # "weighted": ||r||_W < tol ||b||_W ; "euclidean_h": ||H r|| < tol ||H b||
    stop_norm: str = "weighted"
    # always orthogonalize twice (debugging aid)
    double_orth: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ContractViolation("tol must be positive")
        if self.max_iter < 0:
            raise ContractViolation("max_iter must be non-negative")
        if self.restart is not None and self.restart < 1:
            raise ContractViolation("restart must be at least 1")
        if self.mode not in MODES:
            raise ContractViolation(f"mode must be one of {MODES}")
        if self.stop_norm not in STOP_NORMS:
            raise ContractViolation(f"stop_norm must be one of {STOP_NORMS}")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: np.ndarray
    breakdown: bool
    theta_exp: float
    wallclock: float
    # ||H r_i|| per iteration, the quantity shared by both modes
    h_residual_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    true_residual: float = float("nan")
    full_residual: float = float("nan")
    orthogonality_error: float = 0.0
    residual_drift: bool = False
    mode: str = "weighted_right"


def _apply(op, x):
    if op is None:
        return np.array(x, dtype=np.float64)
    if hasattr(op, "apply"):
        return np.asarray(op.apply(x))
    if callable(op):
        return np.asarray(op(x))
    return np.asarray(op @ x)


def theta_from_history(history):
    """min_i 1 - (h_{i+1}/h_i)^2 over consecutive nonzero history entries."""
    h = np.asarray(history, dtype=np.float64)
    if h.size < 2:
        return float("nan")
    prev, nxt = h[:-1], h[1:]
    ok = prev > 0
    if not np.any(ok):
        return float("nan")
    return float(np.min(1.0 - (nxt[ok] / prev[ok]) ** 2))


class _Cycle:
    """One Arnoldi cycle with Givens least squares and residual tracking.

    The residual after step i is ``g_{i+1} p_i`` with the direction
    recurrence ``p_i = -s_i p_{i-1} + c_i v_{i+1}``; ``D p_i`` is carried
    along so that the H-image of the residual is available for free.
    """

    def __init__(self, apply_B, apply_W, apply_D, r0, beta, Wr0, cfg, project=None):
        self.apply_B, self.apply_W, self.apply_D = apply_B, apply_W, apply_D
        self.cfg = cfg
        self.project = project
        v = r0 / beta
        self.V = [v]
        self.WV = [Wr0 / beta]
        self.DV = [apply_D(v)]
        self.R = []
        self.cs, self.sn = [], []
        self.g = [beta]
        self.p = v.copy()
        self.Dp = self.DV[0].copy()
        self.breakdown = False

    def _w_norm(self, w):
        Ww = self.apply_W(w)
        ww = float(np.dot(Ww, w))
        if ww < -1e-12 * float(np.dot(w, w)):
            raise HpdViolationError("weight is not positive definite")
        return Ww, np.sqrt(max(ww, 0.0))

    def step(self):
        j = len(self.R)
        w = self.apply_B(self.DV[j])
        h = np.zeros(j + 2)
        _, norm0 = self._w_norm(w)
        prev = norm0
        for sweep in range(2):
            for i in range(j + 1):
                c = float(np.dot(self.WV[i], w))
                h[i] += c
                w = w - c * self.V[i]
            Ww, hn = self._w_norm(w)
            if not (self.cfg.double_orth or hn < REORTH_TRIGGER * prev):
                break
            prev = hn
        if self.project is not None:
            # rounding pushes w out of range(P_D) and the division by a small
            # h[j+1] amplifies it from step to step; put it back
            w, Ww = self.project(w, Ww)
            hn = np.sqrt(max(float(np.dot(Ww, w)), 0.0))
        h[j + 1] = hn
        if not np.all(np.isfinite(h)):
            raise NumericalFailureError("non-finite value in the Arnoldi recurrence")
        for i in range(j):
            a, b = h[i], h[i + 1]
            h[i] = self.cs[i] * a + self.sn[i] * b
            h[i + 1] = -self.sn[i] * a + self.cs[i] * b
        a, b = h[j], h[j + 1]
        rho = np.hypot(a, b)
        c, s = (1.0, 0.0) if rho == 0.0 else (a / rho, b / rho)
        self.cs.append(c)
        self.sn.append(s)
        h[j] = rho
        self.R.append(h[: j + 1].copy())
        gj = self.g[j]
        self.g[j] = c * gj
        self.g.append(-s * gj)
        self.breakdown = hn <= self.cfg.breakdown_eps * max(norm0, 1e-300)
        if not self.breakdown:
            v = w / hn
            Dv = self.apply_D(v)
            self.V.append(v)
            self.WV.append(Ww / hn)
            self.DV.append(Dv)
        else:
            v = Dv = np.zeros_like(w)
        self.p = -s * self.p + c * v
        self.Dp = -s * self.Dp + c * Dv
        return abs(self.g[j + 1])

    def solution(self, drop_last=False):
        """Least-squares coefficients from the rotated triangular system."""
        k = len(self.R) - (1 if drop_last else 0)
        if k <= 0:
            return np.zeros(0)
        R = np.zeros((k, k))
        for j in range(k):
            R[: j + 1, j] = self.R[j][: j + 1]
        return scipy.linalg.solve_triangular(R, np.asarray(self.g[:k]))

    def orthogonality_error(self):
        V = np.column_stack(self.V)
        G = V.T @ np.column_stack(self.WV)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def _gmres(apply_B, apply_W, apply_D, residual, x0, cfg, stop_scale, callback, left,
           project=None):
    """Shared restarted Arnoldi loop.

    ``residual(x)`` returns the residual of the projected system
    (preconditioned from the left in the unweighted mode).  ``project``,
    when given, maps ``(w, W w)`` back onto the range of the deflation
    projector.
    """
    x = np.array(x0, dtype=np.float64)
    r = residual(x)
    Wr = apply_W(r)
    beta = float(np.sqrt(max(np.dot(Wr, r), 0.0)))
    if np.dot(Wr, r) < -1e-12 * np.dot(r, r):
        raise HpdViolationError("weight is not positive definite")
    hist = [beta]
    hr0 = float(np.linalg.norm(r if left else apply_D(r)))
    hhist = [hr0]
    stop0 = beta if cfg.stop_norm == "weighted" else hr0
    if callback is not None:
        callback(0, r)
    if not np.isfinite(beta):
        raise NumericalFailureError("non-finite initial residual")
    it = 0
    breakdown = False
    orth = 0.0
    converged = stop0 < cfg.tol * stop_scale or beta == 0.0
    restart = cfg.restart or cfg.max_iter
    while not converged and it < cfg.max_iter and not breakdown:
        steps = min(restart, cfg.max_iter - it)
        cyc = _Cycle(apply_B, apply_W, apply_D, r, beta, Wr, cfg, project)
        drop_last = False
        for _ in range(steps):
            res = cyc.step()
            it += 1
            if not np.isfinite(res):
                raise NumericalFailureError("non-finite residual estimate")
            gj = cyc.g[-1]
            hist.append(res)
            hnorm = abs(gj) * float(np.linalg.norm(cyc.p if left else cyc.Dp))
            hhist.append(hnorm)
            if callback is not None:
                callback(it, gj * cyc.p)
            value = res if cfg.stop_norm == "weighted" else hnorm
            if value < cfg.tol * stop_scale:
                converged = True
                break
            if cyc.breakdown:
                breakdown = True
                # singular projected system: the last column adds nothing
                last = cyc.R[-1]
                drop_last = abs(last[-1]) <= cfg.breakdown_eps * max(np.max(np.abs(last)), 1e-300)
                break
        y = cyc.solution(drop_last)
        basis = cyc.DV if not left else cyc.V
        if y.size:
            x = x + np.column_stack(basis[: y.size]) @ y
        orth = max(orth, cyc.orthogonality_error())
        r = residual(x)
        Wr = apply_W(r)
        beta = float(np.sqrt(max(np.dot(Wr, r), 0.0)))
    return x, hist, hhist, it, converged, breakdown, orth, beta


def _finish_report(cfg, hist, hhist, it, converged, breakdown, orth, true_res, scale, t0):
    hist = np.asarray(hist)
    drift = bool(abs(true_res - hist[-1]) > 10 * cfg.tol * max(scale, 1e-300))
    if drift:
        warnings.warn(
            f"recurrence residual {hist[-1]:.3e} and true residual {true_res:.3e} disagree",
            RuntimeWarning, stacklevel=3)
    if breakdown and not converged:
        converged = true_res < cfg.tol * scale * 10
    return SolveReport(
        converged=bool(converged), iterations=it, residual_history=hist,
        breakdown=bool(breakdown), theta_exp=theta_from_history(hist),
        wallclock=time.perf_counter() - t0, h_residual_history=np.asarray(hhist),
        true_residual=true_res, orthogonality_error=orth, residual_drift=drift,
        mode=cfg.mode)


def wpd_gmres(A, b, H=None, W=None, pair=None, cfg=None, x0=None, callback=None):
    """Solve the projected system ``P_D A x~ = P_D b`` with weighted GMRES.

    Parameters
    ----------
    A : sparse matrix or LinearOperator
    b : right-hand side of the full system
    H : hpd right preconditioner, identity when None
    W : hpd weight, identity when None
    pair : DeflationPair, no deflation when None
    cfg : SolverConfig
    x0 : initial guess, zero by default
    callback : called as ``callback(i, r_i)`` with the residual of the
        projected system at every iteration (i = 0 is the initial residual)

    Returns
    -------
    x_tilde, SolveReport
        Pass ``x_tilde`` to :func:`recombine` to obtain the solution of
        ``A x = b`` (or use :func:`solve_full`).
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    pair = pair or empty_pair(n, A)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    t0 = time.perf_counter()

    def apply_H(v):
        return _apply(H, v)

    def apply_W(v):
        return _apply(W, v)

    def apply_B(Hv):
        return apply_PD(pair, _apply(A, Hv))

    def residual(x):
        return apply_PD(pair, b - _apply(A, x))

    bW = float(np.sqrt(max(np.dot(apply_W(b), b), 0.0)))
    scale = bW if cfg.stop_norm == "weighted" else float(np.linalg.norm(apply_H(b)))
    project = None
    if pair.m:
        WAZ = apply_W(pair.AZ)

        def project(w, Ww):
            s = dense_lu_solve(pair.E_factor, pair.Y.T @ w)
            return w - pair.AZ @ s, Ww - WAZ @ s

    x, hist, hhist, it, conv, brk, orth, true_res = _gmres(
        apply_B, apply_W, apply_H, residual, x0, cfg, scale, callback, left=False,
        project=project)
    rep = _finish_report(cfg, hist, hhist, it, conv, brk, orth, true_res, bW, t0)
    if cfg.stop_norm == "euclidean_h":
        rep.converged = bool(conv or (brk and rep.h_residual_history[-1] < cfg.tol * scale))
    return x, rep


def gmres_unweighted_left(A, b, H=None, pair=None, cfg=None, x0=None, callback=None):
    """Euclidean GMRES on ``H P_D A x~ = H P_D b``.

    The residual history holds ``||H r_i||`` and the stopping rule is
    ``||H r_i|| < tol ||H b||``.
    """
    cfg = cfg or SolverConfig(mode="unweighted_left")
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    pair = pair or empty_pair(n, A)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    t0 = time.perf_counter()

    def apply_B(v):
        return _apply(H, apply_PD(pair, _apply(A, v)))

    def residual(x):
        return _apply(H, apply_PD(pair, b - _apply(A, x)))

    def ident(v):
        return np.asarray(v)

    scale = float(np.linalg.norm(_apply(H, b)))
    x, hist, hhist, it, conv, brk, orth, true_res = _gmres(
        apply_B, ident, ident, residual, x0, cfg, scale, callback, left=True)
    rep = _finish_report(cfg, hist, hhist, it, conv, brk, orth, true_res, scale, t0)
    rep.mode = "unweighted_left"
    return x, rep


def solve_full(A, b, H=None, W=None, pair=None, cfg=None, callback=None):
    """Direct part plus weighted GMRES on the projected system, recombined."""
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    pair = pair or empty_pair(b.shape[0], A)
    if cfg.mode == "unweighted_left":
        xt, rep = gmres_unweighted_left(A, b, H, pair, cfg, callback=callback)
    else:
        xt, rep = wpd_gmres(A, b, H, W, pair, cfg, callback=callback)
    x = recombine(pair, xt, b)
    r = b - _apply(A, x)
    Wn = W if cfg.mode == "weighted_right" else None
    rep.full_residual = float(np.sqrt(max(np.dot(_apply(Wn, r), r), 0.0)))
    return x, rep


def one_step_bound_probe(A, H, W, pair, r):
    """Squared residual ratio of the one-dimensional step along H r.

    Returns ``1 - <q, r>_W^2 / (||q||_W^2 ||r||_W^2)`` with
    ``q = P_D A H r``; this dominates the squared ratio achieved by a GMRES
    step from r.
    """
    n = np.asarray(r).shape[0]
    pair = pair or empty_pair(n, A)
    r = apply_PD(pair, np.asarray(r, dtype=np.float64))
    Wr = _apply(W, r)
    rr = float(np.dot(Wr, r))
    if rr <= 0.0:
        return 0.0
    q = apply_PD(pair, _apply(A, _apply(H, r)))
    qq = float(np.dot(_apply(W, q), q))
    if qq <= 0.0:
        return 1.0
    qr = float(np.dot(Wr, q))
    return max(0.0, 1.0 - qr * qr / (qq * rr))
