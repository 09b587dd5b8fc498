import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from wpdgmres.errors import (
    ContractViolation,
    NotEnoughEigenpairsError,
    NotPositiveDefiniteError,
    PartialConvergenceError,
)
from wpdgmres.eigenpencil import (
    PencilEigenSet,
    pencil_dense,
    pencil_lanczos,
    real_deflation_basis,
    solve_pencil,
    tau_of,
)
from wpdgmres.linalg import sparse_cholesky

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def oracle_mus(N, M):
    """Imaginary parts of the generalized eigenvalues from scipy's QZ."""
    lam = scipy.linalg.eigvals(np.asarray(N.todense() if sp.issparse(N) else N),
                               np.asarray(M.todense() if sp.issparse(M) else M))
    return np.sort(np.abs(lam.imag))[::-1], np.max(np.abs(lam.real))


def spans_match(A, B):
    """Mutual least-squares projection residuals of two column spaces."""
    def resid(X, Y):
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        return np.linalg.norm(X @ coef - Y) / max(np.linalg.norm(Y), 1e-300)
    return max(resid(A, B), resid(B, A))


class TestDense:
    def test_zero_skew_part(self):
        eigs = pencil_dense(sp.csr_matrix((3, 3)), sp.identity(3, format="csr"), 3)
        np.testing.assert_array_equal(eigs.mus, 0.0)

    def test_rotation_with_identity(self):
        eigs = pencil_dense(sp.csr_matrix(ROT), sp.identity(2, format="csr"), 2)
        np.testing.assert_allclose(eigs.mus, [1.0, -1.0], atol=1e-15)
        # N z = i mu z with mu = +1 for z = (1, i)/sqrt(2)
        np.testing.assert_allclose(eigs.pairs[0].vector, np.array([1, 1j]) / np.sqrt(2), atol=1e-15)
        np.testing.assert_allclose(eigs.pairs[1].vector, np.array([1, -1j]) / np.sqrt(2), atol=1e-15)

    def test_weighted_mass(self):
        M = sp.diags([1.0, 4.0]).tocsr()
        eigs = pencil_dense(sp.csr_matrix(2 * ROT), M, 2)
        np.testing.assert_allclose(eigs.mus, [1.0, -1.0], atol=1e-14)
        np.testing.assert_allclose(eigs.pairs[0].vector, np.array([1, 0.5j]) / np.sqrt(2), atol=1e-14)
        for p in eigs.pairs:
            assert p.m_norm_error <= 1e-14

    def test_not_skew(self):
        with pytest.raises(ContractViolation):
            pencil_dense(sp.identity(2, format="csr"), sp.identity(2, format="csr"), 2)

    def test_mass_not_spd(self):
        with pytest.raises(NotPositiveDefiniteError):
            pencil_dense(sp.csr_matrix(ROT), sp.diags([1.0, -1.0]).tocsr(), 2)

    def test_matches_qz_oracle(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, problem16.n)
        ref, real_part = oracle_mus(problem16.N, problem16.M)
        assert real_part <= 1e-10 * ref[0]
        np.testing.assert_allclose(np.abs(eigs.mus), ref, rtol=0, atol=1e-10 * ref[0])
        assert eigs.rho == pytest.approx(ref[0], rel=1e-12)

    def test_odd_k_keeps_partners_together(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 5)
        assert len(eigs) == 6
        assert eigs.mus[4] == -eigs.mus[5]


def check_invariants(eigs, problem):
    M, N = problem.M, problem.N
    A = problem.A
    Z = eigs.vectors
    G = Z.conj().T @ (M @ Z)
    np.testing.assert_allclose(G, np.eye(len(eigs)), rtol=0, atol=1e-8)
    mus = eigs.mus
    assert np.all(np.diff(np.abs(mus)) <= 1e-12 * eigs.spectral_radius)
    positive = mus[mus > 0]
    negative = np.sort(-mus[mus < 0])[::-1]
    np.testing.assert_allclose(np.sort(positive)[::-1], negative, rtol=0, atol=1e-10)
    for p in eigs.pairs:
        Mz = M @ p.vector
        assert np.linalg.norm(A @ p.vector - (1 + 1j * p.mu) * Mz) <= 1e-8 * np.linalg.norm(Mz)
        assert np.linalg.norm(N @ p.vector - 1j * p.mu * Mz) <= 1e-8 * np.linalg.norm(Mz)


class TestLanczos:
    def test_rotation_cases(self):
        for Mdiag, scale in (([1.0, 1.0], 1.0), ([1.0, 4.0], 2.0)):
            M = sp.diags(Mdiag).tocsr()
            eigs = pencil_lanczos(sparse_cholesky(M), sp.csr_matrix(scale * ROT), 2)
            np.testing.assert_allclose(eigs.mus, [1.0, -1.0], atol=1e-13)

    def test_empty_request(self, problem16):
        eigs = pencil_lanczos(sparse_cholesky(problem16.M), problem16.N, 0)
        assert len(eigs) == 0

    def test_matches_dense_top20(self, problem16):
        dense = pencil_dense(problem16.N, problem16.M, 20)
        lanc = pencil_lanczos(sparse_cholesky(problem16.M), problem16.N, 20, tol=1e-10)
        ref = np.abs(dense.mus)
        np.testing.assert_allclose(np.abs(lanc.mus[:20]), ref, rtol=1e-8)
        check_invariants(lanc, problem16)

    def test_partial_convergence_error(self, problem16):
        with pytest.raises(PartialConvergenceError) as info:
            pencil_lanczos(sparse_cholesky(problem16.M), problem16.N, 40, tol=1e-14, max_iters=8)
        partial = info.value.converged
        assert isinstance(partial, PencilEigenSet) and len(partial) < 40

    def test_auto_dispatch(self, problem16):
        assert solve_pencil(problem16.N, problem16.M, 4).method == "dense"
        assert solve_pencil(problem16.N, problem16.M, 4, method="lanczos").method == "lanczos"
        with pytest.raises(ContractViolation):
            solve_pencil(problem16.N, problem16.M, 4, method="arpack")


class TestInvariants:
    def test_dense_set(self, problem16):
        check_invariants(pencil_dense(problem16.N, problem16.M, 30), problem16)


class TestRealBasis:
    def test_rank_zero(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 4)
        assert real_deflation_basis(eigs, 0).shape == (problem16.n, 0)

    def test_rotation_basis(self):
        eigs = pencil_dense(sp.csr_matrix(ROT), sp.identity(2, format="csr"), 2)
        Z = real_deflation_basis(eigs, 2)
        np.testing.assert_allclose(Z, np.eye(2) / np.sqrt(2), atol=1e-15)

    def test_model_rank_and_span(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 12)
        Z = real_deflation_basis(eigs, 10)
        assert np.linalg.matrix_rank(Z) == 10
        V = eigs.vectors[:, :10]
        assert np.allclose(Z.imag if np.iscomplexobj(Z) else 0.0, 0.0)
        assert spans_match(np.hstack([V.real, V.imag]), Z) <= 1e-10
        # the complex eigenvectors lie in the real span
        coef, *_ = np.linalg.lstsq(Z.astype(complex), V, rcond=None)
        assert np.linalg.norm(Z @ coef - V) <= 1e-10 * np.linalg.norm(V)

    def test_odd_rank(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 4)
        with pytest.raises(ContractViolation):
            real_deflation_basis(eigs, 3)

    def test_not_enough_pairs(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 4)
        with pytest.raises(NotEnoughEigenpairsError):
            real_deflation_basis(eigs, 8)


class TestTau:
    def test_no_deflation_gives_spectral_radius(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 4)
        assert tau_of(eigs, 0).value == pytest.approx(eigs.rho)

    def test_exhausted(self):
        eigs = pencil_dense(sp.csr_matrix(ROT), sp.identity(2, format="csr"), 2)
        tau = tau_of(eigs, 2)
        assert tau.value == 0.0 and tau.exhausted

    def test_matches_oracle(self, problem16):
        eigs = pencil_dense(problem16.N, problem16.M, 12)
        ref, _ = oracle_mus(problem16.N, problem16.M)
        assert tau_of(eigs, 10).value == pytest.approx(ref[10], rel=1e-10)
        assert not tau_of(eigs, 10).exhausted
