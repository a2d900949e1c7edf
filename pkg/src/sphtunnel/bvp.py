"""Boundary-value solver for complex tunneling trajectories.

The (possibly regularized) equations of motion

    xdd + grad V(x) - i*eps*grad f(x) = 0

are discretized on the non-uniform complex-time lattice of a
:class:`~sphtunnel.contour.TimeContour` with a three-point second-order
stencil.  In-state boundary conditions fix the total energy E and the
initial transverse oscillator energy E_y by matching the first two lattice
points to the analytic free solution (linear drift plus oscillator); final
conditions are either inclusive (real out-state, fixed arrival line x_f)
or exclusive (fixed final oscillator energy E_y^f).

The nonlinear system is solved by a damped Newton iteration.  Internally
every interior equation is scaled by h_-*h_+/2, which equilibrates the
Jacobian rows; the Jacobian is assembled analytically in a real banded
form (the realification of the complex 2x2 block-tridiagonal structure,
bandwidth 7) and factorized by banded LU, i.e. forward-backward block
elimination.  ``residual`` reports the unscaled discretized operator,
``NewtonReport.residual_norm`` the scaled norm the solver converges on.

Initial guesses come from two generators: backward Cauchy shooting from a
real out-state (robust anywhere the regularized trajectory is stable) and
the zero-energy Euclidean path on the vertical contour segment.  Converged
solutions are moved around parameter space by small-step continuation.
"""

import numpy as np
from dataclasses import dataclass, field, replace
from scipy.linalg import solve_banded

from .contour import TimeContour, interpolate_positions
from .errors import (NoConvergence, SingularBlock, ContinuationStuck)

XF0_DEFAULT = 12.0


@dataclass(frozen=True)
class TrajectoryParams:
    """Quantum numbers and solver settings attached to one trajectory."""

    E: float
    E_y: float
    eps: float = 0.0
    bc_kind: str = "inclusive"        # "inclusive" | "exclusive"
    E_y_f: float = None               # used by exclusive BCs
    x_f0: float = XF0_DEFAULT
    omega: float = 0.5

    def validate(self):
        if self.bc_kind not in ("inclusive", "exclusive"):
            raise ValueError(f"unknown bc_kind {self.bc_kind!r}")
        if self.bc_kind == "exclusive" and self.E_y_f is None:
            raise ValueError("exclusive boundary conditions need E_y_f")
        if self.E_y <= 0:
            raise ValueError("E_y must be positive (the excited-state "
                             "solver degenerates at E_y = 0)")
        if self.E <= self.E_y:
            raise ValueError("need E > E_y for a propagating in-state")


@dataclass
class Trajectory:
    """Complex positions sampled on a contour, plus quantum numbers."""

    contour: TimeContour
    x: np.ndarray                     # (N, 2) complex
    params: TrajectoryParams

    def with_params(self, **kw):
        return Trajectory(self.contour, self.x.copy(),
                          replace(self.params, **kw))

    def onto(self, target_contour):
        """Interpolate the positions onto a refined/coarsened contour."""
        xi = interpolate_positions(self.contour, self.x, target_contour)
        return Trajectory(target_contour, xi, self.params)


@dataclass
class NewtonReport:
    iterations: int
    residual_norm: float
    converged: bool
    damping_history: list = field(default_factory=list)
    message: str = ""


@dataclass
class InAsymptotics:
    """Free-solution constants extracted from the first two lattice points."""

    p: complex          # x-velocity
    a: complex          # e^{-i w t} oscillator coefficient
    abar: complex       # e^{+i w t} oscillator coefficient
    t0: complex
    x0: complex
    y0: complex
    ydot0: complex
    x_intercept: complex    # continuation of the drift line to t = 0


@dataclass
class OutAsymptotics:
    q: complex
    c: complex
    cbar: complex
    t0: complex         # final lattice time
    x0: complex
    y0: complex
    ydot0: complex
    E_y_f: complex      # 2 w^2 c cbar


def _osc_coeffs(ya, yb, ta, tb, omega):
    """Solve y(t) = a e^{-iwt} + abar e^{+iwt} through two samples."""
    det = np.exp(1j * omega * (tb - ta)) - np.exp(-1j * omega * (tb - ta))
    a = (ya * np.exp(1j * omega * tb) - yb * np.exp(1j * omega * ta)) / det
    abar = (yb * np.exp(-1j * omega * ta)
            - ya * np.exp(-1j * omega * tb)) / det
    return a, abar


def _osc_eval(a, abar, t, omega):
    y = a * np.exp(-1j * omega * t) + abar * np.exp(1j * omega * t)
    ydot = 1j * omega * (abar * np.exp(1j * omega * t)
                         - a * np.exp(-1j * omega * t))
    return y, ydot


def in_asymptotics(traj, omega=None):
    """Extract (p, a, abar) of the in-state free form from the lattice."""
    w = traj.params.omega if omega is None else omega
    t = traj.contour.points
    p = (traj.x[1, 0] - traj.x[0, 0]) / (t[1] - t[0])
    a, abar = _osc_coeffs(traj.x[0, 1], traj.x[1, 1], t[0], t[1], w)
    y0, ydot0 = _osc_eval(a, abar, t[0], w)
    return InAsymptotics(p=p, a=a, abar=abar, t0=t[0], x0=traj.x[0, 0],
                         y0=y0, ydot0=ydot0,
                         x_intercept=traj.x[0, 0] - p * t[0])


def out_asymptotics(traj, omega=None):
    w = traj.params.omega if omega is None else omega
    t = traj.contour.points
    q = (traj.x[-1, 0] - traj.x[-2, 0]) / (t[-1] - t[-2])
    c, cbar = _osc_coeffs(traj.x[-2, 1], traj.x[-1, 1], t[-2], t[-1], w)
    y0, ydot0 = _osc_eval(c, cbar, t[-1], w)
    return OutAsymptotics(q=q, c=c, cbar=cbar, t0=t[-1], x0=traj.x[-1, 0],
                          y0=y0, ydot0=ydot0,
                          E_y_f=2.0 * w**2 * c * cbar)


# ----------------------------------------------------------------------
# residual
# ----------------------------------------------------------------------

def _interior_weights(t):
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    hs = hm + hp
    return hm, hp, hs


def residual_scaled(model, traj):
    """Scaled residual vector, complex shape (2N,).

    Interior rows carry the h_-h_+/2 scaling used by the Newton solver;
    this is the quantity whose infinity norm defines convergence.  The two
    leading entries hold the in-state conditions, the two trailing ones
    the out-state conditions (for inclusive runs the final y-entry packs
    the two reality conditions Im y at the last two nodes into one complex
    number).
    """
    pr = traj.params
    t = traj.contour.points
    X = traj.x
    N = len(t)
    R = np.zeros((N, 2), dtype=complex)

    hm, hp, hs = _interior_weights(t)
    gx, gy = model.grad_mod(X[1:-1, 0], X[1:-1, 1], pr.eps)
    s = 0.5 * hm * hp
    R[1:-1, 0] = ((hp / hs) * X[:-2, 0] - X[1:-1, 0]
                  + (hm / hs) * X[2:, 0] + s * gx)
    R[1:-1, 1] = ((hp / hs) * X[:-2, 1] - X[1:-1, 1]
                  + (hm / hs) * X[2:, 1] + s * gy)

    w = pr.omega
    p = (X[1, 0] - X[0, 0]) / (t[1] - t[0])
    a, abar = _osc_coeffs(X[0, 1], X[1, 1], t[0], t[1], w)
    R[0, 0] = p - np.sqrt(2.0 * (pr.E - pr.E_y))
    R[0, 1] = 2.0 * w**2 * a * abar - pr.E_y

    R[-1, 0] = X[-1, 0] - pr.x_f0
    if pr.bc_kind == "inclusive":
        R[-1, 1] = X[-1, 1].imag + 1j * X[-2, 1].imag
    else:
        c, cbar = _osc_coeffs(X[-2, 1], X[-1, 1], t[-2], t[-1], w)
        R[-1, 1] = 2.0 * w**2 * c * cbar - pr.E_y_f
    return R.reshape(-1)


def residual(model, traj):
    """Unscaled residual of the discretized equations, complex (2N,)."""
    R = residual_scaled(model, traj).reshape(-1, 2).copy()
    t = traj.contour.points
    hm, hp, _ = _interior_weights(t)
    R[1:-1] /= (0.5 * hm * hp)[:, None]
    return R.reshape(-1)


def residual_norm(model, traj):
    return float(np.max(np.abs(residual_scaled(model, traj))))


# ----------------------------------------------------------------------
# Jacobian (real banded form)
# ----------------------------------------------------------------------

_BW = 7  # scalar bandwidth of the realified block-tridiagonal system


def _add_block(ab, brow, bcol, M):
    """Place a real 4x4 block into banded storage."""
    for r in range(4):
        for c in range(4):
            v = M[r, c]
            if v != 0.0:
                i = 4 * brow + r
                j = 4 * bcol + c
                ab[_BW + i - j, j] += v


def _rot(z):
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


def _realify(J2):
    """Realify a holomorphic complex 2x2 block."""
    out = np.zeros((4, 4))
    out[0:2, 0:2] = _rot(J2[0, 0])
    out[0:2, 2:4] = _rot(J2[0, 1])
    out[2:4, 0:2] = _rot(J2[1, 0])
    out[2:4, 2:4] = _rot(J2[1, 1])
    return out


def _jacobian_banded(model, traj):
    pr = traj.params
    t = traj.contour.points
    X = traj.x
    N = len(t)
    n = 4 * N
    ab = np.zeros((2 * _BW + 1, n))

    hm, hp, hs = _interior_weights(t)
    s = 0.5 * hm * hp
    wm = hp / hs
    wp = hm / hs
    hxx, hxy, hyy = model.hess_mod(X[1:-1, 0], X[1:-1, 1], pr.eps)

    # interior blocks, vectorized over k = 1..N-2
    ks = np.arange(1, N - 1)

    def scatter(brows, bcols, r, c, vals):
        i = 4 * brows + r
        j = 4 * bcols + c
        ab[_BW + i - j, j] += vals

    for (dcol, wgt) in ((-1, wm), (1, wp)):
        re, im = wgt.real, wgt.imag
        for comp in (0, 1):          # x rows / y rows
            r0 = 2 * comp
            scatter(ks, ks + dcol, r0, r0, re)
            scatter(ks, ks + dcol, r0, r0 + 1, -im)
            scatter(ks, ks + dcol, r0 + 1, r0, im)
            scatter(ks, ks + dcol, r0 + 1, r0 + 1, re)

    # center blocks: -I + s * Hmod
    cxx = s * hxx
    cxy = s * hxy
    cyy = s * hyy
    for (r0, c0, z, shift) in ((0, 0, cxx, -1.0), (0, 2, cxy, 0.0),
                               (2, 0, cxy, 0.0), (2, 2, cyy, -1.0)):
        scatter(ks, ks, r0, c0, z.real + shift)
        scatter(ks, ks, r0, c0 + 1, -z.imag)
        scatter(ks, ks, r0 + 1, c0, z.imag)
        scatter(ks, ks, r0 + 1, c0 + 1, z.real + shift)

    w = pr.omega
    # in-state rows (holomorphic in x0, x1, y0, y1)
    h0 = t[1] - t[0]
    det = np.exp(1j * w * (t[1] - t[0])) - np.exp(-1j * w * (t[1] - t[0]))
    a, abar = _osc_coeffs(X[0, 1], X[1, 1], t[0], t[1], w)
    da_dy0 = np.exp(1j * w * t[1]) / det
    da_dy1 = -np.exp(1j * w * t[0]) / det
    dab_dy0 = -np.exp(-1j * w * t[1]) / det
    dab_dy1 = np.exp(-1j * w * t[0]) / det
    g2_y0 = 2.0 * w**2 * (abar * da_dy0 + a * dab_dy0)
    g2_y1 = 2.0 * w**2 * (abar * da_dy1 + a * dab_dy1)
    _add_block(ab, 0, 0, _realify(np.array([[-1.0 / h0, 0.0],
                                            [0.0, g2_y0]])))
    _add_block(ab, 0, 1, _realify(np.array([[1.0 / h0, 0.0],
                                            [0.0, g2_y1]])))

    # out-state rows
    B_last = np.zeros((4, 4))
    B_prev = np.zeros((4, 4))
    B_last[0:2, 0:2] = _rot(1.0 + 0.0j)       # x_f - x_f0
    if pr.bc_kind == "inclusive":
        B_last[2, 3] = 1.0                    # Im y at node N-1
        B_prev[3, 3] = 1.0                    # Im y at node N-2
    else:
        dt = t[-1] - t[-2]
        det2 = np.exp(1j * w * dt) - np.exp(-1j * w * dt)
        c, cbar = _osc_coeffs(X[-2, 1], X[-1, 1], t[-2], t[-1], w)
        dc_dyp = np.exp(1j * w * t[-1]) / det2
        dc_dyl = -np.exp(1j * w * t[-2]) / det2
        dcb_dyp = -np.exp(-1j * w * t[-1]) / det2
        dcb_dyl = np.exp(-1j * w * t[-2]) / det2
        g4_yp = 2.0 * w**2 * (cbar * dc_dyp + c * dcb_dyp)
        g4_yl = 2.0 * w**2 * (cbar * dc_dyl + c * dcb_dyl)
        B_prev[2:4, 2:4] = _rot(g4_yp)
        B_last[2:4, 2:4] = _rot(g4_yl)
    _add_block(ab, N - 1, N - 1, B_last)
    _add_block(ab, N - 1, N - 2, B_prev)
    return ab


def _real_vector(Rc):
    out = np.empty(2 * len(Rc))
    out[0::2] = Rc.real
    out[1::2] = Rc.imag
    return out


def jacobian_apply_fd(model, traj, direction, step=1e-7):
    """Finite-difference directional derivative of the scaled residual."""
    Xp = traj.x + step * direction
    Xm = traj.x - step * direction
    rp = residual_scaled(model, Trajectory(traj.contour, Xp, traj.params))
    rm = residual_scaled(model, Trajectory(traj.contour, Xm, traj.params))
    return (rp - rm) / (2.0 * step)


def jacobian_apply(model, traj, direction):
    """Analytic J @ direction for a complex direction field (N, 2)."""
    ab = _jacobian_banded(model, traj)
    u = np.empty(4 * traj.x.shape[0])
    u[0::4] = direction[:, 0].real
    u[1::4] = direction[:, 0].imag
    u[2::4] = direction[:, 1].real
    u[3::4] = direction[:, 1].imag
    n = len(u)
    out = np.zeros(n)
    for off in range(-_BW, _BW + 1):
        row = ab[_BW + off]
        js = np.arange(max(0, -off), n - max(0, off))
        out[js + off] += row[js] * u[js]
    res = out[0::2] + 1j * out[1::2]
    return res


def _lm_step(model, traj, ab, Rc, r2):
    """One Levenberg-Marquardt step from the banded Jacobian.

    Returns (trajectory, residual, inf-norm, 2-norm) on improvement of
    the 2-norm, else None.
    """
    from scipy import sparse
    from scipy.sparse.linalg import spsolve
    n = ab.shape[1]
    J = sparse.dia_matrix((ab, np.arange(_BW, -_BW - 1, -1)),
                          shape=(n, n)).tocsr()
    rhs_full = _real_vector(Rc)
    g = J.T @ rhs_full
    JTJ = (J.T @ J).tocsc()
    scale = JTJ.diagonal().max()
    mu = 1e-8 * scale
    for _ in range(12):
        du = spsolve(JTJ + mu * sparse.identity(n, format="csc"), -g)
        if not np.all(np.isfinite(du)):
            mu *= 10.0
            continue
        dX = np.empty_like(traj.x)
        dX[:, 0] = du[0::4] + 1j * du[1::4]
        dX[:, 1] = du[2::4] + 1j * du[3::4]
        cand = Trajectory(traj.contour, traj.x + dX, traj.params)
        Rc_new = residual_scaled(model, cand)
        r2new = float(np.linalg.norm(Rc_new))
        if np.isfinite(r2new) and r2new < r2:
            return cand, Rc_new, float(np.max(np.abs(Rc_new))), r2new
        mu *= 10.0
    return None


def newton_solve(model, initial, tol=1e-10, max_iter=30, max_halvings=8):
    """Damped Newton-Raphson solve of the discretized boundary problem.

    Returns ``(trajectory, report)``; raises :class:`NoConvergence` when
    the iteration cap is hit, the line search stalls, or NaNs appear, and
    :class:`SingularBlock` when the banded elimination hits a singular
    pivot.
    """
    pr = initial.params
    pr.validate()
    if abs(pr.omega - model.omega) > 0:
        raise ValueError("trajectory omega differs from the model")
    traj = Trajectory(initial.contour, initial.x.astype(complex).copy(),
                      pr)
    history = []
    Rc = residual_scaled(model, traj)
    rnorm = float(np.max(np.abs(Rc)))
    r2 = float(np.linalg.norm(Rc))
    for it in range(1, max_iter + 1):
        if rnorm < tol:
            return traj, NewtonReport(iterations=it - 1,
                                      residual_norm=rnorm, converged=True,
                                      damping_history=history)
        if not np.isfinite(rnorm):
            raise NoConvergence("NaN in residual",
                                NewtonReport(it - 1, rnorm, False, history))
        ab = _jacobian_banded(model, traj)
        rhs = -_real_vector(Rc)
        try:
            du = solve_banded((_BW, _BW), ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularBlock(str(exc))
        if not np.all(np.isfinite(du)):
            raise SingularBlock("non-finite Newton step")
        dX = np.empty_like(traj.x)
        dX[:, 0] = du[0::4] + 1j * du[1::4]
        dX[:, 1] = du[2::4] + 1j * du[3::4]

        # damp on the 2-norm (guaranteed descent direction for exact J)
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            cand = Trajectory(traj.contour, traj.x + lam * dX, pr)
            Rc_new = residual_scaled(model, cand)
            rnew = float(np.max(np.abs(Rc_new)))
            r2new = float(np.linalg.norm(Rc_new))
            if np.isfinite(r2new) and (r2new < r2 or rnew < tol):
                accepted = True
                break
            lam *= 0.5
        if not accepted or (lam < 0.1 and it > 3):
            # soft-mode regime: a regularized least-squares step makes
            # much better progress than a heavily damped Newton step
            lm = _lm_step(model, traj, ab, Rc, r2)
            if lm is not None:
                cand, Rc_new, rnew, r2new = lm
                lam = -1.0          # marks an LM step in the history
                accepted = True
        if not accepted:
            raise NoConvergence(
                f"line search stalled at residual {rnorm:.3e}",
                NewtonReport(it, rnorm, False, history))
        history.append(lam)
        traj, Rc, rnorm, r2 = cand, Rc_new, rnew, r2new
    if rnorm < tol:
        return traj, NewtonReport(max_iter, rnorm, True, history)
    raise NoConvergence(f"no convergence after {max_iter} iterations "
                        f"(residual {rnorm:.3e})",
                        NewtonReport(max_iter, rnorm, False, history))


# ----------------------------------------------------------------------
# backward-shooting seed
# ----------------------------------------------------------------------

def _rk4_complex(model, eps, state, t0, t1, n):
    """RK4 for the (modified) equations of motion in complex time.

    ``state`` is (..., 4): positions and velocities, batched over leading
    axes so parameter scans integrate in one vectorized sweep.
    """
    h = (t1 - t0) / n

    def deriv(s):
        gx, gy = model.grad_mod(s[..., 0], s[..., 1], eps)
        return np.stack([s[..., 2], s[..., 3], -gx, -gy], axis=-1)

    s = state
    for _ in range(n):
        k1 = deriv(s)
        k2 = deriv(s + 0.5 * h * k1)
        k3 = deriv(s + 0.5 * h * k2)
        k4 = deriv(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return s


def shoot_back(model, contour, params, y_f, ydot_f, dt_max=0.02,
               return_velocities=False):
    """Integrate the Cauchy problem backward from a real out-state.

    The final state sits at the last contour point: x = x_f0, outgoing
    x-velocity fixed by energy conservation, transverse state (y_f,
    ydot_f).  Integration runs node-to-node along the reversed contour, so
    the returned positions are exactly lattice samples.
    """
    t = contour.points
    N = len(t)
    vx2 = 2.0 * (params.E - 0.5 * ydot_f**2
                 - model.V(params.x_f0, y_f))
    vx = np.sqrt(complex(vx2))
    state = np.array([params.x_f0, y_f, vx, ydot_f], dtype=complex)
    X = np.empty((N, 2), dtype=complex)
    V = np.empty((N, 2), dtype=complex)
    X[-1] = state[:2]
    V[-1] = state[2:]
    for k in range(N - 1, 0, -1):
        n_sub = max(1, int(np.ceil(abs(t[k] - t[k - 1]) / dt_max)))
        state = _rk4_complex(model, params.eps, state, t[k], t[k - 1],
                             n_sub)
        X[k - 1] = state[:2]
        V[k - 1] = state[2:]
    traj = Trajectory(contour, X, params)
    if return_velocities:
        return traj, V
    return traj


def shoot_in_energy(model, contour, params, y_f, ydot_f, dt_max=0.02):
    """Initial oscillator energy reached by the backward shot."""
    traj, V = shoot_back(model, contour, params, y_f, ydot_f, dt_max,
                         return_velocities=True)
    w = params.omega
    return 0.5 * (V[0, 1] ** 2 + w**2 * traj.x[0, 1] ** 2), traj


def shoot_in_energy_batch(model, contour, params, y_f, ydot_f,
                          dt_max=0.05, return_vx=False):
    """Vectorized in-state oscillator energy over arrays of out-states.

    Only the endpoint is kept; used to map the shooting landscape before
    polishing individual roots.  ``return_vx`` adds the in-end x velocity
    (backward shots that re-reflect carry the wrong drift sign and must
    be filtered out).
    """
    t = contour.points
    w = params.omega
    y_f = np.asarray(y_f, dtype=complex)
    ydot_f = np.asarray(ydot_f, dtype=complex)
    vx = np.sqrt(2.0 * (params.E - 0.5 * ydot_f**2
                        - model.V(params.x_f0, y_f)).astype(complex))
    state = np.stack(
        [np.full_like(y_f, params.x_f0), y_f, vx, ydot_f], axis=-1)
    for k in range(len(t) - 1, 0, -1):
        n_sub = max(1, int(np.ceil(abs(t[k] - t[k - 1]) / dt_max)))
        state = _rk4_complex(model, params.eps, state, t[k], t[k - 1],
                             n_sub)
    ey = 0.5 * (state[..., 3] ** 2 + w**2 * state[..., 1] ** 2)
    if return_vx:
        return ey, state[..., 2]
    return ey


def seed_by_shooting(model, contour, params, n_amp=6, n_phase=16,
                     amp_max=None, dt_max=0.02, newton_tol=1e-9,
                     max_iter=25, verbose=False):
    """Find a trajectory guess by backward shooting on (y_f, ydot_f).

    A coarse scan over out-state amplitude and phase supplies starting
    points, sorted by the in-state energy mismatch; each is polished by a
    2x2 Newton iteration on Im E_y = 0, Re E_y = E_y.  Returns the lattice
    guess (to be handed to ``newton_solve``).
    """
    w = params.omega
    if amp_max is None:
        amp_max = np.sqrt(2.0 * min(params.E, 1.0)) / w

    def g(u):
        ey, _ = shoot_in_energy(model, contour, params, u[0], u[1], dt_max)
        return np.array([ey.real - params.E_y, ey.imag])

    cands = []
    for A in np.linspace(amp_max / n_amp, amp_max, n_amp):
        for ph in np.linspace(0, 2 * np.pi, n_phase, endpoint=False):
            u = np.array([A * np.cos(ph), -w * A * np.sin(ph)])
            r = g(u)
            if np.all(np.isfinite(r)):
                cands.append((float(np.hypot(*r)), u))
    cands.sort(key=lambda z: z[0])

    last_err = None
    for _, u in cands[:8]:
        try:
            uu = u.copy()
            for _ in range(max_iter):
                r = g(uu)
                nr = float(np.hypot(*r))
                if verbose:
                    print(f"  shoot: u={uu}, |r|={nr:.3e}")
                if nr < newton_tol:
                    _, traj = shoot_in_energy(model, contour, params,
                                              uu[0], uu[1], dt_max)
                    return traj
                d = 1e-7
                r1 = g(uu + [d, 0.0])
                r2 = g(uu + [0.0, d])
                J = np.column_stack([(r1 - r) / d, (r2 - r) / d])
                step = np.linalg.solve(J, -r)
                cap = 0.5 * max(1.0, float(np.max(np.abs(uu))))
                sc = min(1.0, cap / max(float(np.max(np.abs(step))),
                                        1e-300))
                uu = uu + sc * step
                if not np.all(np.isfinite(uu)):
                    raise NoConvergence("shooting left the domain")
            raise NoConvergence("shooting Newton cap reached")
        except (NoConvergence, np.linalg.LinAlgError) as exc:
            last_err = exc
            continue
    raise NoConvergence(f"backward shooting found no seed ({last_err})")


def solve_inclusive(model, contour, E, E_y, eps=0.0, x_f0=XF0_DEFAULT,
                    tol=1e-10, **shoot_kw):
    """Shooting seed + lattice Newton polish, in one call."""
    params = TrajectoryParams(E=E, E_y=E_y, eps=eps, x_f0=x_f0,
                              omega=model.omega)
    guess = seed_by_shooting(model, contour, params, **shoot_kw)
    return newton_solve(model, guess, tol=tol)


# ----------------------------------------------------------------------
# Euclidean seed
# ----------------------------------------------------------------------

def instanton_seed(model, contour, x_left=-5.0, x_right=5.0, gtol=1e-9):
    """Zero-energy Euclidean path on the vertical segment, extended.

    Minimizes the discretized Euclidean action over real paths on the
    vertical (imaginary-time) segment with endpoints pinned deep in the
    asymptotic regions, then extends along the horizontal segments by
    solving the Cauchy problem from the junction points.  The result seeds
    continuation toward small nonzero (E, E_y).
    """
    from scipy.optimize import minimize

    sl = contour.segment_slices[1]
    iA, iB = sl.start, sl.stop          # vertical nodes: iA .. iB inclusive
    t = contour.points
    sigma = np.abs(t[iA:iB + 1] - t[iA])         # Euclidean time, 0 at A
    M = len(sigma)
    dsig = np.diff(sigma)

    ends = np.array([[x_left, 0.0], [x_right, 0.0]])

    def unpack(u):
        path = np.empty((M, 2))
        path[0], path[-1] = ends
        path[1:-1] = u.reshape(-1, 2)
        return path

    def action(u):
        p = unpack(u)
        dp = np.diff(p, axis=0)
        kin = np.sum(np.sum(dp**2, axis=1) / (2.0 * dsig))
        Vv = model.V(p[:, 0], p[:, 1]).real
        pot = np.sum(0.5 * dsig * (Vv[:-1] + Vv[1:]))
        return kin + pot

    def grad(u):
        p = unpack(u)
        dp = np.diff(p, axis=0)
        g = np.zeros((M, 2))
        g[:-1] -= dp / dsig[:, None]
        g[1:] += dp / dsig[:, None]
        gx, gy = model.grad(p[:, 0], p[:, 1])
        wgt = np.zeros(M)
        wgt[:-1] += 0.5 * dsig
        wgt[1:] += 0.5 * dsig
        g[:, 0] += wgt * gx.real
        g[:, 1] += wgt * gy.real
        return g[1:-1].reshape(-1)

    u0 = np.linspace(ends[0], ends[1], M)[1:-1].reshape(-1)
    res = minimize(action, u0, jac=grad, method="CG",
                   options={"maxiter": 2000, "gtol": gtol})
    if np.max(np.abs(grad(res.x))) > gtol:
        res = minimize(action, res.x, jac=grad, method="L-BFGS-B",
                       options={"maxiter": 5000, "ftol": 1e-18,
                                "gtol": gtol})
    path = unpack(res.x)

    # Cauchy extensions from the junctions; dx/dt = i dx/dsigma there
    N = len(t)
    X = np.empty((N, 2), dtype=complex)
    X[iA:iB + 1] = path
    vA = 1j * (path[1] - path[0]) / dsig[0]
    state = np.array([path[0, 0], path[0, 1], vA[0], vA[1]], dtype=complex)
    for k in range(iA, 0, -1):
        n_sub = max(1, int(np.ceil(abs(t[k] - t[k - 1]) / 0.02)))
        state = _rk4_complex(model, 0.0, state, t[k], t[k - 1], n_sub)
        X[k - 1] = state[:2]
    vB = 1j * (path[-1] - path[-2]) / dsig[-1]
    state = np.array([path[-1, 0], path[-1, 1], vB[0], vB[1]],
                     dtype=complex)
    for k in range(iB, N - 1):
        n_sub = max(1, int(np.ceil(abs(t[k + 1] - t[k]) / 0.02)))
        state = _rk4_complex(model, 0.0, state, t[k], t[k + 1], n_sub)
        X[k + 1] = state[:2]

    params = TrajectoryParams(E=0.0, E_y=0.0, eps=0.0, omega=model.omega)
    traj = Trajectory(contour, X, params)
    traj.euclidean_action = float(res.fun)
    traj.euclidean_grad_norm = float(np.max(np.abs(grad(res.x))))
    return traj


def instanton_guess(model, contour, E, E_y, x_left=-5.0, x_right=5.0,
                    gtol=1e-9):
    """Small-(E, E_y) initial guess built around the Euclidean path.

    The vertical segment carries the instanton; the horizontal tails are
    replaced by energy-consistent classical motion: a real roll-out at
    energy E from the lower junction and a drift-plus-oscillator in-tail
    from the upper one.  Tails are only first approximations (the true
    tails are complex), but they are fixed by Newton in the nearly linear
    asymptotic regions.
    """
    inst = instanton_seed(model, contour, x_left, x_right, gtol)
    t = contour.points
    sl = contour.segment_slices[1]
    iA, iB = sl.start, sl.stop
    N = len(t)
    X = inst.x.copy()
    w = model.omega

    # out-tail: real classical roll-out at energy E
    xB, yB = X[iB].real
    v0 = np.sqrt(max(2.0 * (E - model.V(xB, yB).real), 1e-12))
    state = np.array([xB, yB, v0, 0.0], dtype=complex)
    for k in range(iB, N - 1):
        n_sub = max(1, int(np.ceil(abs(t[k + 1] - t[k]) / 0.02)))
        state = _rk4_complex(model, 0.0, state, t[k], t[k + 1], n_sub)
        X[k + 1] = state[:2]

    # in-tail: drift at p plus a real oscillator with energy E_y
    p = np.sqrt(2.0 * (E - E_y))
    xA, yA = X[iA].real
    ydotA = np.sqrt(max(2.0 * E_y - w**2 * yA**2, 0.0))
    dt = t[:iA] - t[iA]
    X[:iA, 0] = xA + p * dt
    X[:iA, 1] = yA * np.cos(w * dt) + (ydotA / w) * np.sin(w * dt)
    # pinning the arrival line to the roll-out endpoint keeps the first
    # Newton solve local; callers then continue x_f0 to its target
    guess = Trajectory(contour, X,
                       TrajectoryParams(E=E, E_y=E_y, omega=model.omega,
                                        x_f0=float(X[-1, 0].real)))
    guess.euclidean_action = inst.euclidean_action
    return guess


# ----------------------------------------------------------------------
# continuation
# ----------------------------------------------------------------------

def transfer_to_contour(model, traj, new_contour, tol=1e-10, **newton_kw):
    """Re-solve a converged trajectory on a contour with different extents.

    Valid when the two contours trace the same path up to truncation or
    extension of the end segments (same T_imag and t_drop).  Node values
    are interpolated along the common arc length from A'; nodes beyond
    the old range are filled with the free asymptotic continuation.
    """
    old = traj.contour
    dn, do = new_contour.descriptor, old.descriptor
    if dn.T_imag != do.T_imag or dn.t_drop != do.t_drop or \
            dn.conjugate != do.conjugate:
        raise ValueError("transfer requires identical T_imag and t_drop")
    from scipy.interpolate import CubicSpline
    w = traj.params.omega
    # arc length measured from the drop vertex A so the shared region of
    # the two paths carries identical coordinates
    def arc_from_A(cont):
        s = cont.arclength
        iA = cont.segment_slices[1].start
        return s - s[iA]
    s_old = arc_from_A(old)
    s_new = arc_from_A(new_contour)
    spl = CubicSpline(s_old, traj.x, axis=0)
    Xn = spl(np.clip(s_new, s_old[0], s_old[-1]))

    ia = in_asymptotics(traj)
    oa = out_asymptotics(traj)
    tn = new_contour.points
    before = s_new < s_old[0]          # longer in-tail
    if np.any(before):
        y, _ = _osc_eval(ia.a, ia.abar, tn[before], w)
        Xn[before, 0] = ia.x_intercept + ia.p * tn[before]
        Xn[before, 1] = y
    after = s_new > s_old[-1]          # longer out-tail
    if np.any(after):
        y, _ = _osc_eval(oa.c, oa.cbar, tn[after], w)
        Xn[after, 0] = oa.x0 + oa.q * (tn[after] - oa.t0)
        Xn[after, 1] = y
    guess = Trajectory(new_contour, Xn, traj.params)
    return newton_solve(model, guess, tol=tol, **newton_kw)[0]


_CONT_FIELDS = ("E", "E_y", "eps", "E_y_f", "x_f0")


def continue_to(model, start, target, max_step=None, min_step=1e-6,
                tol=1e-10, keep_path=False, callback=None):
    """Walk a converged solution to ``target`` in small parameter steps.

    ``target`` maps parameter names (E, E_y, eps, E_y_f) to goal values.
    The previous solution seeds each Newton solve; steps halve on failure
    and the walk aborts (:class:`ContinuationStuck`) below ``min_step``,
    reporting the last good parameter point.
    """
    if max_step is None:
        max_step = {}
    default_steps = {"E": 0.02, "E_y": 0.01, "eps": 0.25, "E_y_f": 0.02,
                     "x_f0": 1.0}
    # eps steps are taken in log space when both ends are positive

    cur = start
    path = [start]
    goal = {k: float(v) for k, v in target.items() if v is not None}
    for k in goal:
        if k not in _CONT_FIELDS:
            raise ValueError(f"cannot continue in parameter {k!r}")

    def gap(pr):
        out = {}
        for k, v in goal.items():
            x = getattr(pr, k)
            if k == "eps" and v > 0 and x is not None and x > 0:
                out[k] = np.log(v) - np.log(x)
            else:
                out[k] = v - (x if x is not None else 0.0)
        return out

    frac = 1.0
    while True:
        g = gap(cur.params)
        if all(abs(dv) < 1e-14 for dv in g.values()):
            return path if keep_path else cur
        # largest fraction of the remaining gap allowed by per-param steps
        fmax = 1.0
        for k, dv in g.items():
            step = max_step.get(k, default_steps[k])
            if abs(dv) > 0:
                fmax = min(fmax, step / abs(dv))
        f = min(1.0, frac * fmax) if frac * fmax < 1.0 else 1.0
        while True:
            new_kw = {}
            for k, dv in g.items():
                x = getattr(cur.params, k)
                if k == "eps" and goal[k] > 0 and x is not None and x > 0:
                    new_kw[k] = float(np.exp(np.log(x) + f * dv))
                else:
                    new_kw[k] = float((x if x is not None else 0.0)
                                      + f * dv)
            trial = cur.with_params(**new_kw)
            try:
                sol, rep = newton_solve(model, trial, tol=tol)
                break
            except (NoConvergence, SingularBlock):
                f *= 0.5
                if f * max(abs(dv) for dv in g.values()) < min_step:
                    raise ContinuationStuck(
                        "continuation stuck",
                        last_good={k: getattr(cur.params, k)
                                   for k in _CONT_FIELDS},
                        solution=cur)
        cur = sol
        if callback is not None:
            callback(cur)
        if keep_path:
            path.append(cur)
        frac = 1.0


def continue_schedule(model, start, param_name, values, tol=1e-10,
                      max_step=None, min_step=1e-8):
    """Converged solutions at each value of one parameter, in order."""
    out = []
    cur = start
    for v in values:
        cur = continue_to(model, cur, {param_name: v}, tol=tol,
                          max_step=max_step, min_step=min_step)
        out.append(cur)
    return out
