"""Instanton-anchored continuation up in energy."""
import numpy as np
import sys, time
sys.path.insert(0, "/root/pkg/src")
from sphtunnel.model import PotentialModel
from sphtunnel.contour import ContourDescriptor, build_contour
from sphtunnel.bvp import (TrajectoryParams, Trajectory, newton_solve,
                           instanton_seed, continue_to, in_asymptotics,
                           out_asymptotics)
from sphtunnel.observables import (suppression_exponent, theta_T_params,
                                   semiclassical_result)
from sphtunnel.errors import SphtunnelError

np.seterr(all="ignore")
m = PotentialModel()
w = 0.5


def anchor(Timag=12.0, T_after=60.0, T_before=40.0, window=30.0,
           E0=0.05, Ey0=0.01, x_span=4.0, verbose=True):
    d = ContourDescriptor(
        T_before=T_before, T_imag=Timag, T_after=T_after, window=window,
        counts=(int(T_before / 0.05), int(Timag / 0.02),
                int(window / 0.02), int((T_after - window) / 0.05)))
    c = build_contour(d)
    t0 = time.time()
    inst = instanton_seed(m, c, x_left=-x_span, x_right=x_span)
    if verbose:
        print(f"instanton: S_E = {inst.euclidean_action:.6f}, "
              f"|grad| = {inst.euclidean_grad_norm:.2e}, "
              f"max|Im x| vertical = "
              f"{np.abs(inst.x[c.segment_slices[1].start:c.segment_slices[1].stop+1].imag).max():.1e} "
              f"[{time.time()-t0:.1f}s]")
        print(f"  x(A) = {inst.x[c.segment_slices[1].start]}, "
              f"x(B) = {inst.x[c.segment_slices[1].stop]}")
        print(f"  x(end) = {inst.x[-1]}, x(start) = {inst.x[0]}")
    guess = Trajectory(c, inst.x, TrajectoryParams(E=E0, E_y=Ey0, omega=w,
                                                   x_f0=12.0))
    sol, rep = newton_solve(m, guess, max_iter=60)
    if verbose:
        print(f"anchor newton: iters={rep.iterations} "
              f"res={rep.residual_norm:.2e}")
        F = suppression_exponent(m, sol)
        T, th, ph = theta_T_params(sol)
        print(f"  F={F:.6f} T={T:.3f} theta={th:.3f} "
              f"Eyf={out_asymptotics(sol).E_y_f.real:.4f}")
    return sol


if __name__ == "__main__":
    sol = anchor()
    # walk up in E at fixed E_y, print (F, T, theta) along the way
    path = []

    def cb(s):
        try:
            F = suppression_exponent(m, s)
            T, th, _ = theta_T_params(s)
            path.append((s.params.E, s.params.E_y, F, T, th))
        except SphtunnelError:
            pass

    t0 = time.time()
    sol2 = continue_to(m, sol, {"E": 0.9, "E_y": 1.25 / 30.0},
                       max_step={"E": 0.05, "E_y": 0.01}, callback=cb)
    print(f"continuation done [{time.time()-t0:.0f}s]")
    for row in path[::4] + path[-2:]:
        print("  E=%.3f Ey=%.4f F=%.5f T=%.3f th=%.3f" % row)
    res = semiclassical_result(m, sol2)
    print(f"FINAL: F={res.F:.6f} A/sqrt(hbar)={res.A_over_hbar_power:.5f} "
          f"T={res.T:.4f} theta={res.theta:.4f}")
    print(f"oracle reference: F_QM(0.9, 0.0417, hbar=1/30) = 1.1955")
