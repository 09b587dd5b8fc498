"""Experiment driver: sweeps over preconditioners, deflation ranks and weights.

Configuration is an INI file::

    [problem]
    k = 32              ; cells per axis of the structured mesh
    c0 = 1
    nu = 1
    eta = 1, 100        ; one problem per value
    ; bundle = path/to/dir        (M.mtx, N.mtx, b.txt, meta.json) or
    ; matrix = A.mtx and rhs = b.txt

    [preconditioner]
    kinds = identity, inv_hermitian, schwarz
    n_subdomains = 16
    overlap = 1
    coarse = pou        ; pou | none | path to a dense text file of coarse rows

    [deflation]
    ranks = 0, 10, 50, 100
    mode = h_orthogonal ; h_orthogonal | invariant (inv_hermitian only)

    [solver]
    tol = 1e-10
    max_iter = 1000
    restart =           ; empty: full GMRES
    weight = preconditioner   ; preconditioner | identity | unweighted, comma list allowed
    stop_norm = weighted      ; weighted | euclidean_h

    [run]
    seed = 0
    output_dir = results
    threads = 1
    eigensolver = auto  ; auto | dense | lanczos
    theta_samples = 1000

Every key can be overridden from the environment with
``WPDGMRES_<SECTION>_<KEY>``, e.g. ``WPDGMRES_SOLVER_TOL=1e-8``.
"""
import configparser
import csv
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .deflation import build_h_orthogonal, build_invariant
from .diagnostics import BoundReport, estimate_kappa_HM, theta_th, verify_run
from .eigenpencil import real_deflation_basis, solve_pencil, tau_of
from .errors import ConfigurationError
from .gmres import SolveReport, SolverConfig, solve_full
from .io import load_dense, load_matrix_market, load_vector, save_eigen_table, write_residual_csv
from .operators import (
    additive_schwarz_op,
    identity_op,
    inverse_hermitian_op,
    partition_contiguous,
    partition_structured,
)
from .problems import load_bundle, model_problem, problem_from_matrix

log = logging.getLogger(__name__)

ENV_PREFIX = "WPDGMRES_"
PRECONDITIONERS = ("identity", "inv_hermitian", "schwarz")
WEIGHTS = ("preconditioner", "identity", "unweighted")
SUMMARY_COLUMNS = ("m", "iterations", "theta_th", "theta_exp", "kappa_HM", "tau", "converged")

DEFAULTS = {
    "problem": {"k": "16", "c0": "1", "nu": "1", "eta": "1", "bundle": "", "matrix": "", "rhs": ""},
    "preconditioner": {"kinds": "inv_hermitian", "n_subdomains": "16", "overlap": "1", "coarse": "pou"},
    "deflation": {"ranks": "0, 10", "mode": "h_orthogonal"},
    "solver": {"tol": "1e-10", "max_iter": "1000", "restart": "", "weight": "preconditioner",
               "stop_norm": "weighted"},
    "run": {"seed": "0", "output_dir": "results", "threads": "1", "eigensolver": "auto",
            "theta_samples": "1000"},
}


@dataclass(frozen=True)
class PreconditionerSpec:
    kind: str
    n_subdomains: int = 16
    overlap: int = 1
    coarse: Optional[str] = "pou"

    @property
    def label(self):
        if self.kind != "schwarz":
            return self.kind
        tag = f"schwarz{self.n_subdomains}o{self.overlap}"
        if self.coarse is None:
            return tag
        return tag + ("-pou" if self.coarse == "pou" else "-file")


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 16
    c0: float = 1.0
    nu: float = 1.0
    etas: tuple = (1.0,)
    bundle: str = ""
    matrix: str = ""
    rhs: str = ""
    preconditioners: tuple = (PreconditionerSpec("inv_hermitian"),)
    ranks: tuple = (0, 10)
    deflation_mode: str = "h_orthogonal"
    weights: tuple = ("preconditioner",)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    output_dir: str = "results"
    threads: int = 1
    eigensolver: str = "auto"
    theta_samples: int = 1000

    def __post_init__(self):
        if not self.ranks:
            raise ConfigurationError("need at least one deflation rank")
        for m in self.ranks:
            if m < 0 or m % 2:
                raise ConfigurationError(f"deflation ranks must be even and >= 0, got {m}")
        for p in self.preconditioners:
            if p.kind not in PRECONDITIONERS:
                raise ConfigurationError(f"unknown preconditioner {p.kind!r}")
        for w in self.weights:
            if w not in WEIGHTS:
                raise ConfigurationError(f"unknown weight {w!r}")
        if self.deflation_mode not in ("h_orthogonal", "invariant"):
            raise ConfigurationError(f"unknown deflation mode {self.deflation_mode!r}")
        if self.deflation_mode == "invariant" and any(p.kind != "inv_hermitian" for p in self.preconditioners):
            raise ConfigurationError("invariant deflation mode requires the inv_hermitian preconditioner")
        if self.eigensolver not in ("auto", "dense", "lanczos"):
            raise ConfigurationError(f"unknown eigensolver {self.eigensolver!r}")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")


@dataclass
class RunRecord:
    eta: float
    preconditioner: str
    weight: str
    m: int
    report: SolveReport
    kappa_HM: float
    tau: float
    tau_exhausted: bool
    rho: float
    theta_th: float
    bound: Optional[BoundReport] = None
    residual_file: str = ""

    @property
    def group(self):
        return f"eta{_fmt_eta(self.eta)}_{self.preconditioner}_{self.weight}"

    @property
    def bound_satisfied(self):
        return True if self.bound is None else self.bound.passed

    def summary_row(self):
        return [self.m, self.report.iterations, f"{self.theta_th:.6e}",
                f"{self.report.theta_exp:.6e}", f"{self.kappa_HM:.6e}", f"{self.tau:.6e}",
                int(self.report.converged)]


def _fmt_eta(eta):
    return f"{eta:g}"


# -- configuration -----------------------------------------------------------

def _floats(text):
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _words(text):
    return tuple(t.strip() for t in text.replace(";", ",").split(",") if t.strip())


def load_config(path=None, env=None, overrides=None):
    """Read an INI config, apply environment then explicit overrides.

    ``overrides`` maps ``(section, key)`` to a string value.
    """
    env = os.environ if env is None else env
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_dict(DEFAULTS)
    if path is not None:
        if not Path(path).is_file():
            raise ConfigurationError(f"config file {path} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    for section in parser.sections():
        unknown = set(parser[section]) - set(DEFAULTS.get(section, {}))
        if section not in DEFAULTS or unknown:
            raise ConfigurationError(f"unknown config entries in [{section}]: {sorted(unknown) or section}")
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        for section in DEFAULTS:
            if rest.startswith(section + "_") and rest[len(section) + 1:] in DEFAULTS[section]:
                parser[section][rest[len(section) + 1:]] = value
                break
        else:
            raise ConfigurationError(f"environment variable {name} matches no config key")
    for (section, key), value in (overrides or {}).items():
        parser[section][key] = str(value)
    try:
        return _build_config(parser)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid config value: {exc}") from None


def _build_config(p):
    pre = p["preconditioner"]
    coarse = pre["coarse"].strip()
    if coarse.lower() in ("", "none", "pou"):
        coarse = coarse.lower()
    specs = tuple(PreconditionerSpec(kind, int(pre["n_subdomains"]), int(pre["overlap"]),
                                     None if coarse in ("", "none") else coarse)
                  for kind in _words(pre["kinds"]))
    if coarse not in ("", "none", "pou") and not Path(coarse).is_file():
        raise ConfigurationError(f"coarse space {coarse!r} is neither pou, none nor a file")
    s = p["solver"]
    restart = s["restart"].strip()
    solver = SolverConfig(tol=float(s["tol"]), max_iter=int(s["max_iter"]),
                          restart=int(restart) if restart else None, stop_norm=s["stop_norm"].strip())
    r = p["run"]
    prob = p["problem"]
    return ExperimentConfig(
        k=int(prob["k"]), c0=float(prob["c0"]), nu=float(prob["nu"]), etas=_floats(prob["eta"]),
        bundle=prob["bundle"].strip(), matrix=prob["matrix"].strip(), rhs=prob["rhs"].strip(),
        preconditioners=specs, ranks=_ints(p["deflation"]["ranks"]),
        deflation_mode=p["deflation"]["mode"].strip(), weights=_words(s["weight"]),
        solver=solver, seed=int(r["seed"]), output_dir=r["output_dir"].strip(),
        threads=int(r["threads"]), eigensolver=r["eigensolver"].strip(),
        theta_samples=int(r["theta_samples"]))


# -- building blocks ---------------------------------------------------------

def _problems(cfg):
    if cfg.bundle:
        base = load_bundle(cfg.bundle)
        return [base.with_eta(e) for e in cfg.etas] if cfg.etas else [base]
    if cfg.matrix:
        if not cfg.rhs:
            raise ConfigurationError("matrix given without rhs")
        return [problem_from_matrix(load_matrix_market(cfg.matrix), load_vector(cfg.rhs))]
    if cfg.k < 2:
        raise ConfigurationError("k must be at least 2")
    return [model_problem(cfg.k, eta=e, c0=cfg.c0, nu=cfg.nu) for e in cfg.etas]


def build_preconditioner(spec, problem):
    n = problem.n
    if spec.kind == "identity":
        return identity_op(n)
    if spec.kind == "inv_hermitian":
        return inverse_hermitian_op(problem.M)
    # overlap layers follow the sparsity graph of M
    graph = abs(problem.M)
    if problem.grid_shape is not None:
        parts = partition_structured(problem.grid_shape, spec.n_subdomains, spec.overlap, graph)
    else:
        parts = partition_contiguous(graph, spec.n_subdomains, spec.overlap)
    coarse = spec.coarse
    if coarse not in (None, "pou"):
        coarse = load_dense(coarse)
    return additive_schwarz_op(problem.M, parts, coarse=coarse)


def _solve_pencil(cfg, problem, k):
    return solve_pencil(problem.N, problem.M, k, method=cfg.eigensolver, seed=cfg.seed)


def _one_run(cfg, problem, A, H, spec, weight, m, eigs, kappa):
    Z = real_deflation_basis(eigs, m)
    if cfg.deflation_mode == "invariant":
        pair = build_invariant(A, problem.M, Z)
    else:
        pair = build_h_orthogonal(A, H, Z)
    tau = tau_of(eigs, m)
    th = theta_th(kappa.kappa, tau.value)
    if weight == "unweighted":
        scfg = replace(cfg.solver, mode="unweighted_left")
        _, rep = solve_full(A, problem.b, H, None, pair, scfg)
    else:
        W = H if weight == "preconditioner" else None
        _, rep = solve_full(A, problem.b, H, W, pair, cfg.solver)
    bound = None
    if weight == "preconditioner":
        bound = verify_run(A, problem.M, H, pair, rep, tau.value, kappa=kappa,
                           n_samples=cfg.theta_samples, seed=cfg.seed)
    rho = abs(eigs.pairs[0].mu) if eigs.pairs else 0.0
    return RunRecord(problem.eta, spec.label, weight, m, rep, kappa.kappa, tau.value,
                     tau.exhausted, rho, th, bound)


def run_experiment(cfg, write=True):
    """Run the full sweep; returns RunRecords in config order.

    For each problem the pencil is solved once with ``max(ranks) + 2``
    eigenpairs and sliced per rank.  Runs are independent and may execute
    on ``cfg.threads`` threads; outputs are ordered as in the config.
    """
    out = Path(cfg.output_dir)
    if write:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    records = []
    for problem in _problems(cfg):
        A = problem.A
        eigs = _solve_pencil(cfg, problem, max(cfg.ranks) + 2)
        if write:
            save_eigen_table(out / f"eigen_eta{_fmt_eta(problem.eta)}.csv", eigs)
        tasks = []
        for spec in cfg.preconditioners:
            H = build_preconditioner(spec, problem)
            kappa = estimate_kappa_HM(H, problem.M, seed=cfg.seed)
            log.info("eta=%g %s: kappa(HM) ~ %.4g", problem.eta, spec.label, kappa.kappa)
            for weight in cfg.weights:
                for m in cfg.ranks:
                    tasks.append((spec, H, weight, m, kappa))
        def work(t):
            spec, H, weight, m, kappa = t
            rec = _one_run(cfg, problem, A, H, spec, weight, m, eigs, kappa)
            log.info("eta=%g %s weight=%s m=%d: %d iterations, converged=%s", rec.eta,
                     rec.preconditioner, weight, m, rec.report.iterations, rec.report.converged)
            if write:
                name = f"{rec.group}_m{m}.csv"
                write_residual_csv(out / "runs" / name, rec.report)
                rec.residual_file = f"runs/{name}"
            return rec
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                records.extend(pool.map(work, tasks))
        else:
            records.extend(map(work, tasks))
    if write:
        write_summaries(records, out)
    return records


def write_summaries(records, output_dir):
    """One summary CSV per (eta, preconditioner, weight) plus bounds.csv."""
    output_dir = Path(output_dir)
    groups = {}
    for rec in records:
        groups.setdefault(rec.group, []).append(rec)
    paths = []
    for group, recs in groups.items():
        path = output_dir / f"summary_{group}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for rec in recs:
                w.writerow(rec.summary_row())
        paths.append(path)
    with open(output_dir / "bounds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "preconditioner", "weight", "m", "theta_th", "theta_exp",
                    "theta_sampled", "bound_satisfied", "steps_satisfied"])
        for rec in records:
            b = rec.bound
            w.writerow([_fmt_eta(rec.eta), rec.preconditioner, rec.weight, rec.m,
                        f"{rec.theta_th:.6e}", f"{rec.report.theta_exp:.6e}",
                        "" if b is None else f"{b.theta_sampled:.6e}",
                        "" if b is None else int(b.bound_satisfied),
                        "" if b is None else int(b.steps_satisfied)])
    return paths


_PLOT_TEMPLATE = '''"""Convergence curves for {title}."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
CURVES = {curves!r}

fig, ax = plt.subplots(figsize=(6, 4))
for label, rel in CURVES:
    with open(HERE / rel) as fh:
        rows = list(csv.DictReader(fh))
    it = [int(r["iteration"]) for r in rows]
    res = [float(r["w_norm"]) for r in rows]
    ax.semilogy(it, [v / res[0] for v in res], label=label)
ax.set_xlabel("iteration")
ax.set_ylabel("relative residual")
ax.set_title({title!r})
ax.legend()
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''


def emit_plots(records, output_dir):
    """Write one matplotlib script per (eta, preconditioner) group.

    Scripts only reference residual CSVs that were written by
    run_experiment; returns the list of script paths.
    """
    output_dir = Path(output_dir)
    if not records:
        warnings.warn("no run records: no plot scripts written", stacklevel=2)
        return []
    groups = {}
    for rec in records:
        if not rec.residual_file:
            continue
        key = (rec.eta, rec.preconditioner)
        label = f"m={rec.m}" + ("" if rec.weight == "preconditioner" else f" ({rec.weight})")
        groups.setdefault(key, []).append((label, rec.residual_file))
    scripts = []
    for (eta, pre), curves in groups.items():
        stem = f"plot_eta{_fmt_eta(eta)}_{pre}"
        path = output_dir / f"{stem}.py"
        title = f"eta = {_fmt_eta(eta)}, H = {pre}"
        path.write_text(_PLOT_TEMPLATE.format(title=title, curves=curves, png=stem + ".png"))
        scripts.append(path)
    return scripts


def inspect_pencil(cfg, top=200, write=True):
    """Leading |mu| values of the pencil for every configured problem.

    Returns a list of ``(eta, abs_mu)`` with ``abs_mu`` sorted descending.
    """
    out = Path(cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    tables = []
    for problem in _problems(cfg):
        eigs = _solve_pencil(cfg, problem, min(top, problem.n))
        mags = np.abs(eigs.mus)
        if write:
            path = out / f"spectrum_eta{_fmt_eta(problem.eta)}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["index", "abs_mu"])
                for i, v in enumerate(mags, start=1):
                    w.writerow([i, f"{v:.17g}"])
        tables.append((problem.eta, mags))
    return tables


def config_echo(cfg):
    d = asdict(cfg)
    d["solver"] = asdict(cfg.solver)
    return d
