"""P1 finite-element convection-diffusion-reaction model problem.

On the square [-1, 1]^2 with homogeneous Dirichlet conditions the problem
``c0 u - nu lap(u) + a . grad(u) = f`` with the divergence-free field
``a = eta * pi * (-y - 0.8, x)`` gives, after elimination of the boundary
vertices, ``A = M + eta * N_tilde`` where M (mass plus stiffness) is spd
and N_tilde (convection with eta factored out) is skew-symmetric.

Matrix rows correspond to test functions and columns to trial functions,
``A[i, j] = a(phi_j, phi_i)``.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolation
from .io import load_matrix_market, load_vector, save_matrix_market, save_vector
from .linalg import as_csr, sparse_cholesky

# barycentric coordinates of the three edge midpoints (rows) for the three
# vertex basis functions (columns)
_EDGE_MIDPOINTS = np.array([[0.5, 0.5, 0.0],
                            [0.0, 0.5, 0.5],
                            [0.5, 0.0, 0.5]])


def default_rhs(x, y):
    return np.exp(-2.5 * (x ** 2 + (y + 0.8) ** 2))


def unit_convection(x, y):
    """Convection field with eta = 1: pi * (-y - 0.8, x)."""
    return np.pi * (-y - 0.8), np.pi * x


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)
    k: int = 0

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


@dataclass(frozen=True)
class AssembledProblem:
    M: sp.csr_matrix = field(repr=False)
    N_tilde: sp.csr_matrix = field(repr=False)
    eta: float
    b: np.ndarray = field(repr=False)
    # vertex index of every unknown
    dof_map: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def N(self):
        """Skew-symmetric part eta * N_tilde."""
        return as_csr(self.eta * self.N_tilde)

    @property
    def A(self):
        return as_csr(self.M + self.eta * self.N_tilde)

    @property
    def grid_shape(self):
        """(nx, ny) of the interior unknowns for structured meshes, else None."""
        k = self.params.get("k")
        return (k - 1, k - 1) if k else None

    def with_eta(self, eta):
        params = dict(self.params, eta=float(eta))
        return AssembledProblem(self.M, self.N_tilde, float(eta), self.b, self.dof_map, params)


def structured_mesh(k):
    """Uniform triangulation of [-1, 1]^2 with k cells per axis.

    Vertex (i, j) has index ``j * (k + 1) + i``; every cell is split along
    its (i, j)-(i+1, j+1) diagonal into two positively oriented triangles.
    """
    if k < 1:
        raise ContractViolation("need at least one cell per axis")
    t = np.linspace(-1.0, 1.0, k + 1)
    X, Y = np.meshgrid(t, t)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(k), np.arange(k))
    v00 = (j * (k + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + k + 1
    v11 = v01 + 1
    triangles = np.concatenate([np.column_stack([v00, v10, v11]),
                                np.column_stack([v00, v11, v01])])
    ii, jj = np.meshgrid(np.arange(k + 1), np.arange(k + 1))
    boundary = ((ii == 0) | (jj == 0) | (ii == k) | (jj == k)).ravel()
    return TriMesh(vertices, triangles, boundary, k)


def _element_geometry(mesh):
    p = mesh.vertices[mesh.triangles]                 # (T, 3, 2)
    B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns e1, e2
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    if np.any(det <= 0):
        raise ContractViolation("mesh has inverted or degenerate triangles")
    Binv = np.linalg.inv(B)                            # rows: grad of lambda1, lambda2
    grads = np.empty((len(det), 3, 2))
    grads[:, 1:] = Binv
    grads[:, 0] = -Binv.sum(axis=1)
    return p, 0.5 * det, grads


def _dof_numbering(mesh):
    interior = np.flatnonzero(~mesh.boundary_mask)
    number = -np.ones(mesh.n_vertices, dtype=np.intp)
    number[interior] = np.arange(interior.size)
    return interior, number


def _assemble(mesh, local, number, n):
    T = mesh.triangles
    rows = np.repeat(T, 3, axis=1)
    cols = np.tile(T, (1, 3))
    r, c = number[rows].ravel(), number[cols].ravel()
    keep = (r >= 0) & (c >= 0)
    A = sp.coo_matrix((local.reshape(len(T), 9).ravel()[keep], (r[keep], c[keep])), shape=(n, n))
    return as_csr(A)


def _mirror_symmetric(A):
    U = sp.triu(A, k=0, format="csr")
    out = as_csr(U + sp.triu(A, k=1, format="csr").T)
    out.eliminate_zeros()
    return out


def _mirror_skew(A):
    U = sp.triu(A, k=1, format="csr")
    out = as_csr(U - U.T)
    out.eliminate_zeros()
    return out


def assemble_cdr(mesh, c0=1.0, nu=1.0, eta=1.0, f=default_rhs, field_fn=unit_convection):
    """Assemble M, N_tilde and the load vector on a triangular mesh.

    Mass and stiffness use exact element formulas.  The convection form
    ``1/2 int (a.grad(phi_j) phi_i - a.grad(phi_i) phi_j)`` uses the
    edge-midpoint rule, exact for the quadratic integrand of a linear field.
    """
    if c0 <= 0 or nu <= 0:
        raise ContractViolation("c0 and nu must be positive")
    interior, number = _dof_numbering(mesh)
    n = interior.size
    if n == 0:
        raise ContractViolation("mesh has no interior unknowns")
    p, area, grads = _element_geometry(mesh)
    stiff = area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    mass = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    # quadrature points (T, 3, 2) and field values
    q = np.einsum("qv,tvd->tqd", _EDGE_MIDPOINTS, p)
    ax, ay = field_fn(q[..., 0], q[..., 1])
    a = np.stack([ax, ay], axis=-1)                      # (T, q, 2)
    adg = np.einsum("tqd,tjd->tqj", a, grads)            # a(m_q) . grad(phi_j)
    conv = (area / 3.0)[:, None, None] * np.einsum("qi,tqj->tij", _EDGE_MIDPOINTS, adg)
    skew = 0.5 * (conv - conv.transpose(0, 2, 1))
    M = _mirror_symmetric(_assemble(mesh, c0 * mass + nu * stiff, number, n))
    N_tilde = _mirror_skew(_assemble(mesh, skew, number, n))
    sparse_cholesky(M)
    b = assemble_rhs(mesh, f)
    params = {"c0": float(c0), "nu": float(nu), "eta": float(eta), "k": int(mesh.k)}
    return AssembledProblem(M, N_tilde, float(eta), b, interior, params)


def assemble_rhs(mesh, f=default_rhs):
    """Load vector int f phi_i with the edge-midpoint rule, interior rows only."""
    interior, number = _dof_numbering(mesh)
    p, area, _ = _element_geometry(mesh)
    q = np.einsum("qv,tvd->tqd", _EDGE_MIDPOINTS, p)
    fq = np.broadcast_to(np.asarray(f(q[..., 0], q[..., 1]), dtype=np.float64), q.shape[:2])
    local = (area / 3.0)[:, None] * np.einsum("qi,tq->ti", _EDGE_MIDPOINTS, fq)
    full = np.zeros(mesh.n_vertices)
    np.add.at(full, mesh.triangles.ravel(), local.ravel())
    return full[interior]


def model_problem(k, eta=1.0, c0=1.0, nu=1.0):
    return assemble_cdr(structured_mesh(k), c0=c0, nu=nu, eta=eta)


def save_mesh(mesh, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "vertices.txt", mesh.vertices, fmt="%.17g")
    np.savetxt(directory / "triangles.txt", mesh.triangles, fmt="%d")


def save_bundle(problem, directory):
    """Write M.mtx, N.mtx (N_tilde), b.txt and meta.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix_market(directory / "M.mtx", problem.M, symmetry="symmetric")
    save_matrix_market(directory / "N.mtx", problem.N_tilde, symmetry="skew-symmetric")
    save_vector(directory / "b.txt", problem.b)
    meta = dict(problem.params, eta=problem.eta)
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_bundle(directory):
    directory = Path(directory)
    try:
        meta = json.loads((directory / "meta.json").read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"{directory} has no meta.json") from None
    M = load_matrix_market(directory / "M.mtx")
    N = load_matrix_market(directory / "N.mtx")
    b = load_vector(directory / "b.txt")
    if M.shape != N.shape or b.shape[0] != M.shape[0]:
        raise ConfigurationError("bundle matrices and vector have inconsistent sizes")
    N = _mirror_skew(N)
    dof_map = np.arange(M.shape[0])
    return AssembledProblem(_mirror_symmetric(M), N, float(meta.get("eta", 1.0)), b, dof_map, meta)


def problem_from_matrix(A, b):
    """Wrap an external system; its skew part is stored with eta = 1."""
    from .linalg import split_hermitian_skew
    M, N = split_hermitian_skew(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != M.shape[0]:
        raise ConfigurationError("right-hand side length does not match the matrix")
    return AssembledProblem(M, N, 1.0, b, np.arange(M.shape[0]), {"eta": 1.0})
