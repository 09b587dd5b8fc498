"""The spectral radius of M^-1 N does not grow under mesh refinement.

The bound ||a||_inf / (2 sqrt(nu c0)) does not involve the mesh size.  We
check it on three grids, using the dense pencil solver for the small ones
and Lanczos for the 63 x 63 interior grid.
"""
import time

from wpdgmres import model_problem, rho_bound_pde, solve_pencil

ETA = 100.0
bound = rho_bound_pde(1.0, 1.0, ETA)
print(f"bound for eta = {ETA:g}: {bound:.2f}")
for k in (16, 32, 64):
    problem = model_problem(k, eta=ETA)
    t0 = time.perf_counter()
    eigs = solve_pencil(problem.N, problem.M, 2, method="dense" if k <= 32 else "lanczos")
    rho = abs(eigs.mus[0])
    print(f"k = {k:>2} ({problem.n:>4} unknowns, {eigs.method:>7}): rho = {rho:.3f}"
          f"  [{time.perf_counter() - t0:.2f}s]")
