"""Deflation projectors and the direct/iterative split of a linear solve.

For a deflation pair (Y, Z) with coupling block E = Y^T A Z::

    P_D = I - A Z E^{-1} Y^T        Q_D = I - Z E^{-1} Y^T A

Solving A x = b splits into the m-dimensional direct part
``Z E^{-1} Y^T b`` and the projected system ``P_D A x~ = P_D b``; the
solution is ``x = Q_D x~ + Z E^{-1} Y^T b``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, SingularCouplingError
from .linalg import dense_lu_factor, dense_lu_solve

RCOND_MIN = 1e-12


def _apply(A, X):
    if hasattr(A, "apply"):
        return np.asarray(A.apply(X))
    return np.asarray(A @ X)


def _transpose_apply(A, X):
    if hasattr(A, "apply"):
        return None
    return np.asarray(A.T @ X)


def _check_rank(X, name):
    if X.shape[1] == 0:
        return
    if X.shape[1] > X.shape[0]:
        raise ContractViolation(f"{name} has more columns than rows")
    _, R, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0.0 or d[-1] <= max(X.shape) * np.finfo(float).eps * d[0]:
        raise ContractViolation(f"{name} is rank deficient")


@dataclass(frozen=True)
class DeflationPair:
    """Immutable deflation data; ``m == 0`` gives identity projectors."""

    Z: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    AZ: np.ndarray = field(repr=False)
    E_factor: object = field(repr=False)
    mode: str
    A: object = field(default=None, repr=False)
    # A^T Y, cached when A is an explicit matrix
    AtY: np.ndarray = field(default=None, repr=False)

    @property
    def m(self):
        return self.Z.shape[1]

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def rcond(self):
        return self.E_factor.rcond

    def _Yt_A(self, v):
        if self.AtY is not None:
            return self.AtY.T @ v
        return self.Y.T @ _apply(self.A, v)


def _finish(A, Z, Y, AZ, mode):
    E = Y.T @ AZ
    try:
        fac = dense_lu_factor(E)
    except SingularCouplingError:
        raise SingularCouplingError("coupling block Y^T A Z is singular") from None
    if fac.n and fac.rcond < RCOND_MIN:
        raise SingularCouplingError(
            f"coupling block Y^T A Z is ill conditioned (rcond = {fac.rcond:.2e})")
    return DeflationPair(Z, Y, AZ, fac, mode, A, _transpose_apply(A, Y))


def _as_basis(Z, n):
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != n:
        raise ContractViolation(f"basis has {Z.shape[0]} rows, expected {n}")
    return Z


def empty_pair(n, A=None):
    z = np.zeros((n, 0))
    return DeflationPair(z, z, z, dense_lu_factor(np.zeros((0, 0))), "none", A, z)


def build_h_orthogonal(A, H, Z):
    """Pair with Y = H A Z, which makes P_D orthogonal in the H inner product."""
    n = A.shape[0] if not hasattr(A, "dim") else A.dim
    Z = _as_basis(Z, n)
    if Z.shape[1] == 0:
        return empty_pair(n, A)
    _check_rank(Z, "Z")
    AZ = _apply(A, Z)
    Y = _apply(H, AZ)
    return _finish(A, Z, Y, AZ, "h_orthogonal")


def build_invariant(A, M, Z):
    """Pair with Y = Z for H = M^{-1} and Z a union of pencil eigenspaces.

    Well-posedness reduces to invertibility of Y^T M Z.
    """
    n = A.shape[0] if not hasattr(A, "dim") else A.dim
    Z = _as_basis(Z, n)
    if Z.shape[1] == 0:
        return empty_pair(n, A)
    _check_rank(Z, "Z")
    G = Z.T @ (M @ Z)
    try:
        g = dense_lu_factor(G)
    except SingularCouplingError:
        g = None
    if g is None or g.rcond < RCOND_MIN:
        raise SingularCouplingError("Y^T M Z is singular: ker(Y^T) meets range(M Z)")
    return _finish(A, Z, Z.copy(), _apply(A, Z), "invariant")


def build_custom(A, Y, Z):
    n = A.shape[0] if not hasattr(A, "dim") else A.dim
    Z = _as_basis(Z, n)
    Y = _as_basis(Y, n)
    if Y.shape != Z.shape:
        raise ContractViolation("Y and Z must have the same shape")
    if Z.shape[1] == 0:
        return empty_pair(n, A)
    _check_rank(Z, "Z")
    _check_rank(Y, "Y")
    return _finish(A, Z, Y, _apply(A, Z), "custom")


def apply_PD(pair, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != pair.n:
        raise ContractViolation("vector length does not match deflation pair")
    if pair.m == 0:
        return v.copy()
    return v - pair.AZ @ dense_lu_solve(pair.E_factor, pair.Y.T @ v)


def apply_QD(pair, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != pair.n:
        raise ContractViolation("vector length does not match deflation pair")
    if pair.m == 0:
        return v.copy()
    return v - pair.Z @ dense_lu_solve(pair.E_factor, pair._Yt_A(v))


def direct_component(pair, b):
    b = np.asarray(b, dtype=np.float64)
    if pair.m == 0:
        return np.zeros_like(b)
    return pair.Z @ dense_lu_solve(pair.E_factor, pair.Y.T @ b)


def recombine(pair, x_tilde, b):
    return apply_QD(pair, x_tilde) + direct_component(pair, b)
