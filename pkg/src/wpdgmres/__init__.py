"""Weighted, preconditioned, deflated GMRES with spectral deflation spaces.

The pieces, bottom up:

* :mod:`.linalg` sparse/dense kernels, the symmetric/skew splitting and
  weighted inner products;
* :mod:`.operators` apply-only operators and the preconditioners H;
* :mod:`.eigenpencil` the pencil ``N z = i mu M z`` and the real deflation
  basis built from its leading eigenvectors;
* :mod:`.deflation` the projectors P_D, Q_D and the split solve;
* :mod:`.gmres` weighted right-preconditioned GMRES and the unweighted
  left-preconditioned reference;
* :mod:`.diagnostics` condition-number estimates and convergence bounds;
* :mod:`.problems` the P1 convection-diffusion-reaction model problem;
* :mod:`.experiment` / :mod:`.cli` the sweep driver.
"""
from .deflation import (
    DeflationPair,
    apply_PD,
    apply_QD,
    build_custom,
    build_h_orthogonal,
    build_invariant,
    direct_component,
    empty_pair,
    recombine,
)
from .diagnostics import (
    BoundReport,
    estimate_kappa_HM,
    rho_bound_pde,
    theta_exp,
    theta_sampled,
    theta_th,
    verify_run,
)
from .eigenpencil import (
    PencilEigenPair,
    PencilEigenSet,
    pencil_dense,
    pencil_lanczos,
    real_deflation_basis,
    solve_pencil,
    tau_of,
)
from .errors import (
    ConfigurationError,
    ContractViolation,
    HpdViolationError,
    InsufficientDataError,
    MatrixMarketParseError,
    NotEnoughEigenpairsError,
    NotPositiveDefiniteError,
    NumericalFailureError,
    PartialConvergenceError,
    SingularCouplingError,
    WpdError,
)
from .experiment import ExperimentConfig, RunRecord, emit_plots, inspect_pencil, load_config, run_experiment
from .gmres import SolveReport, SolverConfig, gmres_unweighted_left, one_step_bound_probe, solve_full, wpd_gmres
from .io import load_matrix_market, save_matrix_market
from .linalg import sparse_cholesky, split_hermitian_skew, w_inner, w_norm
from .operators import (
    LinearOperator,
    additive_schwarz_op,
    identity_op,
    inverse_hermitian_op,
    matrix_op,
    partition_structured,
    verify_hpd,
)
from .problems import AssembledProblem, TriMesh, assemble_cdr, assemble_rhs, model_problem, structured_mesh

__version__ = "0.1.0"
