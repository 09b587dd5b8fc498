import numpy as np
import pytest
import scipy.sparse as sp

from wpdgmres.problems import model_problem


def random_pd(n, rng, skew=1.0, shift=1.0):
    """Dense positive definite (not symmetric) matrix: spd part + skew part."""
    B = rng.standard_normal((n, n))
    S = B @ B.T / n + shift * np.eye(n)
    C = rng.standard_normal((n, n))
    return S + skew * (C - C.T) / np.sqrt(n)


def random_spd(n, rng, shift=1.0):
    B = rng.standard_normal((n, n))
    return B @ B.T / n + shift * np.eye(n)


@pytest.fixture(scope="session")
def problem16():
    return model_problem(16, eta=1.0)


@pytest.fixture(scope="session")
def problem32():
    return model_problem(32, eta=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def as_sparse(A):
    return sp.csr_matrix(A)


def reference_weighted_gmres(A, b, H, W, n_iter):
    """Residual W-norms of weighted right-preconditioned GMRES, dense.

    With W = L L^T the W-norm of r is the 2-norm of L^T r, so GMRES in the
    W inner product on B = A H is Euclidean GMRES on L^T B L^{-T} with
    right-hand side L^T b.  Each minimum is computed from scratch by a
    least-squares solve over an orthonormal Krylov basis.
    """
    L = np.linalg.cholesky(W)
    B = L.T @ A @ H @ np.linalg.inv(L.T)
    c = L.T @ b
    hist = [np.linalg.norm(c)]
    Q = (c / hist[0])[:, None]
    for _ in range(n_iter):
        w = B @ Q[:, -1]
        for _ in range(2):
            w = w - Q @ (Q.T @ w)
        nrm = np.linalg.norm(w)
        K = B @ Q
        y, *_ = np.linalg.lstsq(K, c, rcond=None)
        hist.append(np.linalg.norm(c - K @ y))
        if nrm <= 1e-14 * np.linalg.norm(B @ Q[:, -1]):
            break
        Q = np.column_stack([Q, w / nrm])
    return np.array(hist)
