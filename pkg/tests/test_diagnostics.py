import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from wpdgmres.deflation import build_h_orthogonal
from wpdgmres.diagnostics import (
    check_steps,
    estimate_kappa_HM,
    rho_bound_pde,
    theta_exp,
    theta_sampled,
    theta_th,
    verify_run,
)
from wpdgmres.eigenpencil import pencil_dense, real_deflation_basis, tau_of
from wpdgmres.errors import ContractViolation, InsufficientDataError
from wpdgmres.gmres import SolverConfig, wpd_gmres
from wpdgmres.operators import identity_op, inverse_hermitian_op
from wpdgmres.problems import model_problem

from conftest import random_spd


class TestThetaTh:
    def test_ideal(self):
        assert theta_th(1.0, 0.0) == 1.0

    def test_inverse_mass_anchor(self):
        assert theta_th(1.0, 0.65) == pytest.approx(1 / 1.4225)
        assert 0.70 <= theta_th(1.0, 0.65) <= 0.71

    def test_schwarz_anchor(self):
        assert 0.0430 <= theta_th(16.241, 0.65) <= 0.0436

    def test_rejects_bad_input(self):
        with pytest.raises(ContractViolation):
            theta_th(0.5, 0.0)
        with pytest.raises(ContractViolation):
            theta_th(1.0, -0.1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.0, 1e6), st.floats(0.0, 1e3), st.floats(1e-3, 10.0))
    def test_monotone(self, kappa, tau, step):
        assert theta_th(kappa, tau + step) < theta_th(kappa, tau)
        assert theta_th(kappa * (1 + step), tau) < theta_th(kappa, tau)


class TestThetaExp:
    def test_stagnation(self):
        assert theta_exp([2.0, 2.0, 2.0]) == 0.0

    def test_geometric(self):
        assert theta_exp([1.0, 0.5, 0.25, 0.125]) == pytest.approx(0.75)

    def test_single_step(self):
        assert theta_exp([3.0, 0.0]) == 1.0

    def test_undefined(self):
        assert np.isnan(theta_exp([1.0]))


class TestKappa:
    def test_inverse_mass_gives_one(self, problem16):
        est = estimate_kappa_HM(inverse_hermitian_op(problem16.M), problem16.M)
        assert est.kappa == pytest.approx(1.0, abs=1e-8)

    def test_diagonal(self):
        est = estimate_kappa_HM(identity_op(2), sp.diags([1.0, 10.0]).tocsr())
        assert est.kappa == pytest.approx(10.0)

    def test_dense_oracle(self, rng):
        M = random_spd(80, rng, shift=0.05)
        H = random_spd(80, rng)
        est = estimate_kappa_HM(H, M, max_iter=200)
        ev = np.sort(scipy.linalg.eigvals(H @ M).real)
        assert ev[0] * (1 - 1e-12) <= est.lambda_min <= est.lambda_max <= ev[-1] * (1 + 1e-12)
        assert est.lambda_min == pytest.approx(ev[0], rel=1e-8)
        assert est.lambda_max == pytest.approx(ev[-1], rel=1e-8)

    def test_identity_grows_with_refinement(self):
        small = model_problem(8)
        large = model_problem(16)
        k8 = estimate_kappa_HM(identity_op(small.n), small.M).kappa
        k16 = estimate_kappa_HM(identity_op(large.n), large.M).kappa
        ev = np.linalg.eigvalsh(small.M.toarray())
        assert k8 == pytest.approx(ev[-1] / ev[0], rel=1e-6)
        assert k16 > 2 * k8

    def test_too_small(self):
        with pytest.raises(InsufficientDataError):
            estimate_kappa_HM(identity_op(1), sp.identity(1, format="csr"))


class TestSampled:
    def test_inverse_preconditioner(self, rng):
        A = random_spd(20, rng)
        assert theta_sampled(A, np.linalg.inv(A), n_samples=50) == pytest.approx(1.0)

    def test_hand_case(self):
        A = np.array([[1.0, 1.0], [-1.0, 1.0]])
        # <Ay, y> = |y|^2 and |Ay|^2 = 2 |y|^2, so the quotient is 1/2 everywhere
        assert theta_sampled(A, np.eye(2), n_samples=10) == pytest.approx(0.5)

    def test_upper_estimate_of_bound(self, problem16):
        H = inverse_hermitian_op(problem16.M)
        eigs = pencil_dense(problem16.N, problem16.M, 12)
        pair = build_h_orthogonal(problem16.A, H, real_deflation_basis(eigs, 10))
        ts = theta_sampled(problem16.A, H, pair, n_samples=200)
        assert theta_th(1.0, tau_of(eigs, 10).value) <= ts + 1e-12


class TestRhoBound:
    def test_unit(self):
        assert rho_bound_pde(1, 1, 1) == pytest.approx(np.pi * np.sqrt(4.24) / 2)
        assert round(rho_bound_pde(1, 1, 1), 2) == 3.23

    def test_eta_100(self):
        assert round(rho_bound_pde(1, 1, 100)) == 323

    def test_symmetric(self):
        assert rho_bound_pde(1, 1, 0) == 0.0

    def test_invalid(self):
        with pytest.raises(ContractViolation):
            rho_bound_pde(0, 1, 1)


class TestVerifyRun:
    def test_ideal_case(self):
        problem = model_problem(8, eta=0.0)
        A = problem.A
        H = inverse_hermitian_op(problem.M)
        _, rep = wpd_gmres(A, problem.b, H, H)
        br = verify_run(A, problem.M, H, None, rep, tau=0.0, n_samples=20)
        assert rep.iterations == 1
        assert br.theta_th == pytest.approx(1.0) and br.theta_exp == pytest.approx(1.0)
        assert br.passed

    def test_inverse_mass_no_deflation(self, problem16):
        H = inverse_hermitian_op(problem16.M)
        eigs = pencil_dense(problem16.N, problem16.M, 2)
        _, rep = wpd_gmres(problem16.A, problem16.b, H, H)
        br = verify_run(problem16.A, problem16.M, H, None, rep, tau_of(eigs, 0).value, n_samples=50)
        assert br.theta_th == pytest.approx(1 / (1 + eigs.rho ** 2), rel=1e-7)
        assert br.bound_satisfied and br.steps_satisfied
        assert br.theta_th <= br.theta_sampled + 1e-12

    def test_eta_100_identity_deflated(self):
        problem = model_problem(12, eta=100.0)
        H = identity_op(problem.n)
        eigs = pencil_dense(problem.N, problem.M, 52)
        pair = build_h_orthogonal(problem.A, H, real_deflation_basis(eigs, 50))
        _, rep = wpd_gmres(problem.A, problem.b, H, H, pair)
        br = verify_run(problem.A, problem.M, H, pair, rep, tau_of(eigs, 50).value, n_samples=50)
        assert rep.converged and br.passed

    def test_check_steps(self):
        ok, worst = check_steps([1.0, 0.5, 0.25], 0.75)
        assert ok and worst == pytest.approx(0.0)
        ok, _ = check_steps([1.0, 0.9], 0.75)
        assert not ok


def test_kappa_ordering_across_preconditioners(problem16):
    from wpdgmres.operators import additive_schwarz_op, partition_structured
    M = problem16.M
    parts = partition_structured(problem16.grid_shape, 16, overlap=1)
    k_inv = estimate_kappa_HM(inverse_hermitian_op(M), M).kappa
    k_as = estimate_kappa_HM(additive_schwarz_op(M, parts, coarse="pou"), M).kappa
    k_id = estimate_kappa_HM(identity_op(problem16.n), M).kappa
    assert k_inv == pytest.approx(1.0, abs=1e-8)
    assert k_inv <= k_as <= k_id
