"""Epsilon families above E_c: reach E=1.2 and take eps -> 0."""
import numpy as np
import sys, time
sys.path.insert(0, "/root/pkg/src")
sys.path.insert(0, "/root/pkg/notes_experiments")
from exp_branch import root_at_anchor, contour_for, m
from sphtunnel.bvp import continue_to, transfer_to_contour, out_asymptotics
from sphtunnel.observables import (suppression_exponent, interaction_time,
                                   theta_T_params)
from sphtunnel.regularized import (build_family, default_eps_grid,
                                   sphaleron_limit, legendre_residual,
                                   eps_scaling_slope, linear_law_slope,
                                   sphaleron_prefactor_samples)
from sphtunnel.model import saddle_frequencies

np.seterr(all="ignore")


def sphaleron_seed(E=1.2, E_y=2.5 / 60, eps0=1e-2, Ta=30.0, Ti=1.8,
                   verbose=True):
    """Converged regularized solution at (E, E_y, eps0) above E_c."""
    sol = root_at_anchor(Ti=Ti, Ta=10.8, verbose=False)
    sol = continue_to(m, sol, {"eps": eps0}, max_step={"eps": 0.5})
    big = contour_for(Ti, Ta, h_win=0.01, wf=0.6)
    sol = transfer_to_contour(m, sol, big)
    sol = continue_to(m, sol, {"E": E, "E_y": E_y},
                      max_step={"E": 0.02, "E_y": 0.01})
    if verbose:
        F = suppression_exponent(m, sol)
        ti = interaction_time(m, sol)
        print(f"seed at (E={E}, Ey={E_y:.4f}, eps={eps0}): F={F:.5f} "
              f"tau+={ti.real:.3f}")
    return sol


if __name__ == "__main__":
    t0 = time.time()
    seed = sphaleron_seed()
    grid = default_eps_grid(1e-2, 1e-6, per_decade=10)
    fam = build_family(m, seed, grid, keep_traj=False)
    print(f"family of {len(fam.entries)} members [{time.time()-t0:.0f}s]")
    tab = fam.table()
    for row in tab[::8]:
        print("  eps=%.3e F=%.8f A=%.6f tau+=%.4f" % tuple(row[:4]))
    print("Legendre defect:", legendre_residual(fam))
    print("A ~ eps^slope:", eps_scaling_slope(fam))
    wm = saddle_frequencies(0.5)[1]
    print(f"F linear slope: {linear_law_slope(fam):.4f} vs 2/w- = {2/wm:.4f}")
    F_sph, A_sph, gamma = sphaleron_limit(fam)
    print(f"F_sph={F_sph:.6f}  A_sph/hbar={A_sph:.5f} (gamma={gamma})")
    # stabilization by eps ~ 1e-6
    Fl = fam.F[np.argsort(fam.eps)][:8]
    print("F at smallest eps:", Fl[:4], " spread:", np.ptp(Fl[:4]))
    # tau vs -ln eps / w-
    le = np.log(fam.eps)
    slope_tau = np.polyfit(le[-15:], fam.tau[-15:], 1)[0]
    print(f"dtau/dln(eps) = {slope_tau:.4f} vs -1/w- = {-1/wm:.4f}")
    samp = sphaleron_prefactor_samples(fam)
    print("A_sph estimator tail:", samp[-6:])
