"""Enumerate backward-shooting roots at (E, E_y) and classify branches."""
import numpy as np
import sys
sys.path.insert(0, "/root/pkg/src")
from sphtunnel.model import PotentialModel
from sphtunnel.contour import ContourDescriptor, build_contour
from sphtunnel.bvp import (TrajectoryParams, Trajectory, newton_solve,
                           shoot_in_energy, in_asymptotics, out_asymptotics)
from sphtunnel.errors import NoConvergence, SingularBlock

np.seterr(all="ignore")

m = PotentialModel()
w = 0.5


def rough_F(sol):
    t = sol.contour.points
    X = sol.x
    Ey = sol.params.E_y
    dx = np.diff(X, axis=0)
    h = np.diff(t)
    S = np.sum(np.sum(dx * dx, axis=1) / (2 * h)
               - h * (m.V(X[:-1, 0], X[:-1, 1]) + m.V(X[1:, 0], X[1:, 1])) / 2)
    ia = in_asymptotics(sol)
    py = np.sqrt(2 * Ey - w**2 * ia.y0**2)
    s_br = 1 if abs(ia.ydot0 - py) < abs(ia.ydot0 + py) else -1
    osc = s_br * (ia.y0 * py / 2 + (Ey / w) * (np.arcsin(w * ia.y0 / np.sqrt(2 * Ey)) - np.pi / 2))
    Bi = ia.p * ia.x0 + osc
    T = -ia.x_intercept.imag / ia.p.real
    th = -2 * w * T + np.log(abs(ia.abar / ia.a))
    return 2 * np.imag(S + Bi), T, th


def zoo(E, Ey, Timag, T_after=14.0, n_amp=8, n_phase=24, eps=0.0):
    d = ContourDescriptor(T_before=40.0, T_imag=Timag, T_after=T_after,
                          window=0.6 * T_after, counts=(1600, max(int(Timag / 0.01), 8), 800, 300))
    c = build_contour(d)
    pr = TrajectoryParams(E=E, E_y=Ey, eps=eps, omega=w, x_f0=12.0)

    def g(u):
        ey, _ = shoot_in_energy(m, c, pr, u[0], u[1], dt_max=0.05)
        return np.array([ey.real - Ey, ey.imag])

    amp_max = np.sqrt(2 * min(E, 1.0)) / w
    found = []
    for A in np.linspace(amp_max / n_amp, amp_max, n_amp):
        for ph in np.linspace(0, 2 * np.pi, n_phase, endpoint=False):
            u = np.array([A * np.cos(ph), -w * A * np.sin(ph)])
            try:
                for _ in range(30):
                    r = g(u)
                    if not np.all(np.isfinite(r)):
                        raise NoConvergence("")
                    if np.hypot(*r) < 1e-9:
                        break
                    dd = 1e-4
                    J = np.column_stack([(g(u + [dd, 0]) - r) / dd,
                                         (g(u + [0, dd]) - r) / dd])
                    st = np.linalg.solve(J, -r)
                    sc = min(1.0, 0.5 / max(np.max(np.abs(st)), 1e-300))
                    u = u + sc * st
                else:
                    continue
                if any(np.hypot(u[0] - v[0], u[1] - v[1]) < 1e-5 for v, *_ in found):
                    continue
                _, guess = shoot_in_energy(m, c, pr, u[0], u[1], dt_max=0.02)
                sol, rep = newton_solve(m, guess)
                F, T, th = rough_F(sol)
                oa = out_asymptotics(sol)
                found.append((u.copy(), F, T, th, float(oa.E_y_f.real), sol))
            except (NoConvergence, SingularBlock, np.linalg.LinAlgError):
                continue
    print(f"== E={E} Ey={Ey} T_imag={Timag} eps={eps}: {len(found)} distinct roots")
    for u, F, T, th, eyf, sol in sorted(found, key=lambda z: z[1]):
        print(f"  yf={u[0]:+.4f} vyf={u[1]:+.4f}  F={F:+.4f}  T={T:+.3f} "
              f"theta={th:+.3f}  Eyf={eyf:.4f}")
    return found


if __name__ == "__main__":
    E = float(sys.argv[1]) if len(sys.argv) > 1 else 0.9
    Ti = float(sys.argv[2]) if len(sys.argv) > 2 else 2.0
    eps = float(sys.argv[3]) if len(sys.argv) > 3 else 0.0
    zoo(E, 0.05, Ti, eps=eps)
