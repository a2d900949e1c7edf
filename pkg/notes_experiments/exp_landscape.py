"""Map the backward-shooting landscape and polish all local minima."""
import numpy as np
import sys, time
sys.path.insert(0, "/root/pkg/src")
from sphtunnel.model import PotentialModel
from sphtunnel.contour import ContourDescriptor, build_contour
from sphtunnel.bvp import (TrajectoryParams, newton_solve, shoot_in_energy,
                           shoot_in_energy_batch, in_asymptotics,
                           out_asymptotics)
from sphtunnel.observables import (action, boundary_term_in,
                                   suppression_exponent, theta_T_params)
from sphtunnel.errors import NoConvergence, SingularBlock, SphtunnelError

np.seterr(all="ignore")
m = PotentialModel()
w = 0.5


def run(E, Ey, Timag, T_after, eps=0.0, ngrid=61, h_in=0.025, T_before=40.0):
    d = ContourDescriptor(
        T_before=T_before, T_imag=Timag, T_after=T_after,
        window=0.5 * T_after,
        counts=(int(T_before / h_in), max(int(Timag / 0.01), 8),
                int(0.5 * T_after / 0.01), int(0.5 * T_after / 0.02)))
    c = build_contour(d)
    pr = TrajectoryParams(E=E, E_y=Ey, eps=eps, omega=w, x_f0=12.0)

    # grid restricted to E_y^f < E (propagating out-state)
    amp = 0.98 * np.sqrt(2.0 * E) / w
    yy = np.linspace(-amp, amp, ngrid)
    vv = np.linspace(-w * amp, w * amp, ngrid)
    Y, V = np.meshgrid(yy, vv, indexing="ij")
    mask = 0.5 * (V**2 + w**2 * Y**2) < 0.98 * E
    t0 = time.time()
    Eyin, vx0 = shoot_in_energy_batch(m, c, pr, Y.ravel(), V.ravel(),
                                      dt_max=0.05, return_vx=True)
    Eyin = Eyin.reshape(Y.shape)
    vx0 = vx0.reshape(Y.shape)
    G = np.abs(Eyin - Ey)
    G[~mask] = np.inf
    G[vx0.real < 0.05] = np.inf
    print(f"landscape in {time.time()-t0:.1f}s; min |g| = {np.nanmin(G):.3e}")

    # local minima
    mins = []
    for i in range(1, ngrid - 1):
        for j in range(1, ngrid - 1):
            if not np.isfinite(G[i, j]):
                continue
            patch = G[i - 1:i + 2, j - 1:j + 2]
            if G[i, j] == patch.min() and G[i, j] < 0.2:
                mins.append((G[i, j], Y[i, j], V[i, j]))
    mins.sort()
    print(f"{len(mins)} local minima")

    sols = []
    for g0, yf, vf in mins[:20]:
        u = np.array([yf, vf])
        try:
            def g(u):
                ey, _ = shoot_in_energy(m, c, pr, u[0], u[1], dt_max=0.04)
                return np.array([ey.real - Ey, ey.imag])
            for _ in range(25):
                r = g(u)
                if not np.all(np.isfinite(r)):
                    raise NoConvergence("")
                if np.hypot(*r) < 1e-10:
                    break
                dd = 1e-4
                J = np.column_stack([(g(u + [dd, 0]) - r) / dd,
                                     (g(u + [0, dd]) - r) / dd])
                st = np.linalg.solve(J, -r)
                sc = min(1.0, 0.3 / max(np.max(np.abs(st)), 1e-300))
                u = u + sc * st
            else:
                continue
            if any(np.hypot(u[0] - s[0], u[1] - s[1]) < 1e-4 for s in sols):
                continue
            _, guess = shoot_in_energy(m, c, pr, u[0], u[1], dt_max=0.02)
            sol, rep = newton_solve(m, guess)
            F = suppression_exponent(m, sol)
            try:
                T, th, ph = theta_T_params(sol)
            except SphtunnelError:
                T, th = np.nan, np.nan
            oa = out_asymptotics(sol)
            sols.append((u[0], u[1], F, T, th, float(oa.E_y_f.real), sol))
        except (SphtunnelError, np.linalg.LinAlgError):
            continue
    print(f"== E={E} Ey={Ey} Timag={Timag} Tafter={T_after} eps={eps}")
    for yf, vf, F, T, th, eyf, sol in sorted(sols, key=lambda z: z[2]):
        print(f"  yf={yf:+.4f} vyf={vf:+.4f}  F={F:+.5f}  T={T:+.3f} "
              f"theta={th:+.3f}  Eyf={eyf:.4f}")
    return sols


if __name__ == "__main__":
    E = float(sys.argv[1]) if len(sys.argv) > 1 else 0.9
    Ti = float(sys.argv[2]) if len(sys.argv) > 2 else 3.0
    Ta = float(sys.argv[3]) if len(sys.argv) > 3 else 9.0
    eps = float(sys.argv[4]) if len(sys.argv) > 4 else 0.0
    run(E, 0.05, Ti, Ta, eps=eps)
