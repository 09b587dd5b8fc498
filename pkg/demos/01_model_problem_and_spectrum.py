"""The model problem and the spectrum that drives deflation.

We assemble the convection-diffusion-reaction problem on a 32 x 32 grid,
split A into its symmetric part M and skew part N, and look at the pencil
N z = i mu M z.  The moduli |mu| decay slowly: there is no clean gap, so
the deflation rank is a free parameter rather than something the spectrum
chooses for us.
"""
import numpy as np

from wpdgmres import model_problem, pencil_dense, rho_bound_pde

K = 32

for eta in (1.0, 100.0):
    problem = model_problem(K, eta=eta)
    print(f"eta = {eta:g}: {problem.n} unknowns, nnz(A) = {problem.A.nnz}")
    eigs = pencil_dense(problem.N, problem.M, 200)
    mags = np.abs(eigs.mus)
    print(f"  rho(M^-1 N) = {eigs.rho:.4f}   (mesh-independent bound {rho_bound_pde(1, 1, eta):.4f})")
    print("  |mu| at positions 1, 11, 51, 101, 200:",
          ", ".join(f"{mags[i]:.3g}" for i in (0, 10, 50, 100, 199)))

    # eigenvalues come in conjugate pairs, so the list is read two at a time
    assert np.allclose(eigs.mus[0::2], -eigs.mus[1::2])

    def draw(ax, mags=mags, eta=eta):
        ax.semilogy(np.arange(1, mags.size + 1), mags, ".")
        ax.set_xlabel("index j")
        ax.set_ylabel("|mu_j|")
        ax.set_title(f"pencil spectrum, eta = {eta:g}, k = {K}")

    from _plotting import figure
    figure(f"spectrum_eta{eta:g}.png", draw)
