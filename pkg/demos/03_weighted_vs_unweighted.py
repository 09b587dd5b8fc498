"""Weighted right preconditioning against plain left preconditioning.

Both solvers stop on ||H r_i|| < tol ||H b||.  The unweighted solver
minimizes exactly that quantity, so its curve can never lie above the
weighted one.  The curves do separate in the middle of a run, yet the
iteration counts end up within one of each other.  Only the weighted
variant comes with a convergence bound.
"""
import numpy as np

from wpdgmres import load_config, run_experiment

cfg = load_config(env={}, overrides={
    ("problem", "k"): 32,
    ("problem", "eta"): "1, 100",
    ("preconditioner", "kinds"): "schwarz",
    ("deflation", "ranks"): "0, 100",
    ("solver", "weight"): "preconditioner, unweighted",
    ("solver", "stop_norm"): "euclidean_h",
    ("run", "theta_samples"): 0,
})
records = run_experiment(cfg, write=False)
runs = {(r.eta, r.m, r.weight): r.report for r in records}

print(f"{'eta':>5} {'m':>4} {'weighted':>9} {'unweighted':>11} {'max gap':>10}")
for eta in cfg.etas:
    for m in cfg.ranks:
        w, u = runs[(eta, m, "preconditioner")], runs[(eta, m, "unweighted")]
        k = min(len(w.h_residual_history), len(u.h_residual_history))
        gap = np.max(w.h_residual_history[:k] - u.h_residual_history[:k]) / u.h_residual_history[0]
        print(f"{eta:>5g} {m:>4} {w.iterations:>9} {u.iterations:>11} {gap:>10.2e}")


def draw(ax):
    for weight, style in (("preconditioner", "-"), ("unweighted", "--")):
        h = runs[(100.0, 100, weight)].h_residual_history
        ax.semilogy(h / h[0], style, label=weight)
    ax.set_xlabel("iteration")
    ax.set_ylabel("||H r_i|| / ||H b||")
    ax.set_title("eta = 100, m = 100, additive Schwarz")
    ax.legend()


from _plotting import figure  # noqa: E402
figure("weighted_vs_unweighted.png", draw)
