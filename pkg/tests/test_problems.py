import json

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from wpdgmres.diagnostics import rho_bound_pde
from wpdgmres.eigenpencil import pencil_dense
from wpdgmres.errors import ConfigurationError, ContractViolation
from wpdgmres.gmres import SolverConfig, wpd_gmres
from wpdgmres.operators import inverse_hermitian_op
from wpdgmres.problems import (
    assemble_cdr,
    assemble_rhs,
    load_bundle,
    model_problem,
    problem_from_matrix,
    save_bundle,
    save_mesh,
    structured_mesh,
    unit_convection,
)


class TestMesh:
    def test_k2(self):
        mesh = structured_mesh(2)
        assert mesh.n_vertices == 9 and mesh.n_triangles == 8
        assert mesh.boundary_mask.sum() == 8
        assert not mesh.boundary_mask[4]

    def test_k32_counts(self):
        mesh = structured_mesh(32)
        assert mesh.n_vertices == 1089
        assert (~mesh.boundary_mask).sum() == 961

    def test_orientation_and_usage(self):
        mesh = structured_mesh(5)
        assert np.all(mesh.signed_areas() > 0)
        np.testing.assert_allclose(mesh.signed_areas().sum(), 4.0)
        assert np.unique(mesh.triangles).size == mesh.n_vertices

    def test_boundary_is_exactly_the_square_edge(self):
        mesh = structured_mesh(6)
        on_edge = np.isclose(np.abs(mesh.vertices), 1.0).any(axis=1)
        np.testing.assert_array_equal(mesh.boundary_mask, on_edge)

    def test_k1_has_no_unknowns(self):
        mesh = structured_mesh(1)
        assert mesh.n_vertices == 4 and mesh.n_triangles == 2
        with pytest.raises(ContractViolation):
            assemble_cdr(mesh)

    def test_export(self, tmp_path):
        save_mesh(structured_mesh(3), tmp_path)
        assert np.loadtxt(tmp_path / "triangles.txt").shape == (18, 3)


class TestAssembly:
    def test_single_dof(self):
        # the centre vertex touches six triangles of area 1/2: mass 6 * (1/2)/6,
        # stiffness 4 (the diagonal-edge couplings cancel)
        for c0, nu in ((1.0, 1.0), (2.0, 0.5)):
            p = assemble_cdr(structured_mesh(2), c0=c0, nu=nu)
            assert p.M.shape == (1, 1)
            assert p.M[0, 0] == pytest.approx(0.5 * c0 + 4.0 * nu)
            assert p.N_tilde.nnz == 0

    def test_symmetric_limit(self):
        p = model_problem(8, eta=0.0)
        A = p.A
        assert abs(A - A.T).max() == 0.0
        np.testing.assert_array_equal(pencil_dense(p.N, p.M, 6).mus, 0.0)

    def test_structure(self, problem16):
        M, Nt = problem16.M, problem16.N_tilde
        assert abs(M - M.T).max() == 0.0
        assert abs(Nt + Nt.T).max() == 0.0
        assert problem16.n == 225
        np.testing.assert_allclose((problem16.A - M - problem16.eta * Nt).toarray(), 0.0, atol=1e-15)

    def test_against_elementwise_oracle(self):
        """Independent per-triangle assembly of the unsymmetrized convection.

        C[i, j] = int a . grad(phi_j) phi_i.  Because div a = 0 and the
        test functions vanish on the boundary, C + C^T = 0, so C itself
        must equal the assembled skew matrix.
        """
        k = 4
        mesh = structured_mesh(k)
        p = assemble_cdr(mesh)
        interior = np.flatnonzero(~mesh.boundary_mask)
        num = {v: i for i, v in enumerate(interior)}
        C = np.zeros((interior.size, interior.size))
        K = np.zeros_like(C)
        for tri in mesh.triangles:
            P = mesh.vertices[tri]
            T = np.array([[1, 1, 1], P[:, 0], P[:, 1]])
            coef = np.linalg.inv(T)          # rows: (c, gx, gy) of each barycentric function
            grads = coef[:, 1:]
            area = 0.5 * np.linalg.det(T)
            mids = [(P[a] + P[b]) / 2 for a, b in ((0, 1), (1, 2), (2, 0))]
            for a in range(3):
                for b in range(3):
                    if tri[a] not in num or tri[b] not in num:
                        continue
                    i, j = num[tri[a]], num[tri[b]]
                    K[i, j] += area * grads[a] @ grads[b]
                    acc = 0.0
                    for q in mids:
                        phi_a = coef[a] @ np.array([1.0, q[0], q[1]])
                        acc += np.dot(unit_convection(*q), grads[b]) * phi_a
                    C[i, j] += area / 3 * acc
        np.testing.assert_allclose(C + C.T, 0.0, atol=1e-13)
        np.testing.assert_allclose(p.N_tilde.toarray(), C, atol=1e-13)
        mass = p.M.toarray() - K
        assert np.all(np.linalg.eigvalsh(mass) > 0)

    def test_spectral_radius_bound(self, problem16):
        rho = pencil_dense(problem16.N, problem16.M, 2).rho
        assert rho <= rho_bound_pde(1, 1, 1)

    def test_symmetric_solve_matches_direct(self):
        p = model_problem(12, eta=0.0)
        H = inverse_hermitian_op(p.M)
        x, rep = wpd_gmres(p.A, p.b, H, H, cfg=SolverConfig(tol=1e-13))
        x_ref = spla.spsolve(p.A.tocsc(), p.b)
        assert np.linalg.norm(x - x_ref) <= 1e-8 * np.linalg.norm(x_ref)

    def test_invalid_coefficients(self):
        with pytest.raises(ContractViolation):
            assemble_cdr(structured_mesh(3), c0=0.0)

    def test_with_eta(self, problem16):
        q = problem16.with_eta(100.0)
        assert q.eta == 100.0 and q.params["eta"] == 100.0
        np.testing.assert_allclose(q.N.toarray(), 100 * problem16.N_tilde.toarray())


class TestRhs:
    def test_zero(self):
        np.testing.assert_array_equal(assemble_rhs(structured_mesh(4), lambda x, y: 0 * x), 0.0)

    def test_constant_on_k2(self):
        # six adjacent triangles of area 1/2, each contributing area/3
        b = assemble_rhs(structured_mesh(2), lambda x, y: np.ones_like(x))
        np.testing.assert_allclose(b, [6 * 0.5 / 3])

    def test_default_positive(self, problem16):
        assert np.all(problem16.b > 0)


class TestBundle:
    def test_round_trip(self, tmp_path, problem16):
        save_bundle(problem16, tmp_path)
        q = load_bundle(tmp_path)
        assert abs(q.M - problem16.M).max() == 0.0
        assert abs(q.N_tilde - problem16.N_tilde).max() == 0.0
        np.testing.assert_array_equal(q.b, problem16.b)
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["k"] == 16 and meta["c0"] == 1.0 and meta["nu"] == 1.0

    def test_missing_meta(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_bundle(tmp_path)

    def test_from_matrix(self, rng):
        A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
        p = problem_from_matrix(sp.csr_matrix(A), np.ones(6))
        np.testing.assert_allclose(p.A.toarray(), A, atol=1e-15)
        with pytest.raises(ConfigurationError):
            problem_from_matrix(sp.csr_matrix(A), np.ones(5))
