"""Deflation rank against iteration count for the three preconditioners.

For each H in {I, M^-1, additive Schwarz} and each rank m we solve with
W = H, record the iteration count, and compare the measured contraction
theta_exp with the guaranteed one theta_th = 1/kappa(HM) * 1/(1 + tau^2).
The guarantee is pessimistic but never violated.
"""
from wpdgmres import load_config, run_experiment

cfg = load_config(env={}, overrides={
    ("problem", "k"): 32,
    ("problem", "eta"): 1,
    ("preconditioner", "kinds"): "identity, inv_hermitian, schwarz",
    ("deflation", "ranks"): "0, 10, 50, 100",
    ("run", "theta_samples"): 200,
})
records = run_experiment(cfg, write=False)

print(f"{'H':>16} {'m':>4} {'iter':>5} {'theta_th':>10} {'theta_exp':>10} {'bound':>6}")
for r in records:
    print(f"{r.preconditioner:>16} {r.m:>4} {r.report.iterations:>5} "
          f"{r.theta_th:>10.3e} {r.report.theta_exp:>10.3e} {'ok' if r.bound_satisfied else 'FAIL'}")

by = {(r.preconditioner, r.m): r.report.iterations for r in records}
print(f"\nidentity: {by[('identity', 0)]} -> {by[('identity', 100)]} iterations with m = 100")
print(f"inverse Hermitian part: {by[('inv_hermitian', 0)]} -> {by[('inv_hermitian', 100)]}")
