"""Semiclassical functionals evaluated on converged trajectories.

Given a solution of the boundary-value problem this module computes the
action and boundary terms, the suppression exponent F = 2 Im(S + B_i), the
interaction time, the linearized perturbation pair with out-state Cauchy
data, the probability prefactor, and the Legendre-dual in-state parameters
(T, theta).  The hbar dependence of the prefactor is carried symbolically:
values are returned divided by hbar^gamma together with the power gamma.
"""

import numpy as np
from dataclasses import dataclass

from .bvp import in_asymptotics, out_asymptotics, _osc_coeffs, _osc_eval
from .errors import (BranchAmbiguity, ComplexParams,
                     DegenerateFinalVelocity, NonPositiveDiscriminant)


@dataclass
class PerturbationPair:
    """Two linearized solutions with canonical out-state Cauchy data."""

    dx1: np.ndarray          # (N, 2) complex
    dx2: np.ndarray
    dEy1: complex            # in-state oscillator-energy increments
    dEy2: complex
    dE1: complex             # total-energy increments (conserved, ~0)
    dE2: complex


@dataclass
class SemiclassicalResult:
    E: float
    E_y: float
    eps: float
    F: float                     # suppression exponent, 2 Im(S + B_i)
    A_over_hbar_power: float     # prefactor / hbar^gamma
    gamma: float
    S: complex
    B_i: complex
    B_f: complex                 # exclusive runs only, else 0
    T_int: complex
    T: float
    theta: float
    dEy1: complex
    dEy2: complex
    F_phase: float               # residual Im-part diagnostics of (T,theta)


def action(model, traj):
    """Original action S = int (xdot^2/2 - V) dt along the contour.

    Trapezoidal rule consistent with the second-order discretization; the
    epsilon term never enters (the regularized functional is S_eps =
    S + i*eps*T_int, assembled by callers when needed).
    """
    t = traj.contour.points
    X = traj.x
    dx = np.diff(X, axis=0)
    h = np.diff(t)
    kin = np.sum(np.sum(dx * dx, axis=1) / (2.0 * h))
    Vv = model.V(X[:, 0], X[:, 1])
    pot = np.sum(0.5 * h * (Vv[:-1] + Vv[1:]))
    return kin - pot


def action_tilde(model, traj):
    """Action integrated by parts, S - [x.xdot/2] at the ends."""
    S = action(model, traj)
    ia = in_asymptotics(traj)
    oa = out_asymptotics(traj)
    b_in = ia.x0 * ia.p + ia.y0 * ia.ydot0
    b_out = oa.x0 * oa.q + oa.y0 * oa.ydot0
    return S - 0.5 * (b_out - b_in)


def interaction_time(model, traj):
    """Contour integral of the barrier weight f along the trajectory."""
    t = traj.contour.points
    X = traj.x
    h = np.diff(t)
    fv = model.f(X[:, 0], X[:, 1])
    return np.sum(0.5 * h * (fv[:-1] + fv[1:]))


def _osc_action_term(y, ydot, E_y, omega):
    """Closed-form int p_y dy' from the turning point to y.

    The square-root branch follows the trajectory velocity (the principal
    arcsin then fixes the antiderivative); when the velocity test is
    marginal the branch with the decaying in-state (nonnegative Im
    contribution) wins.  Raises BranchAmbiguity only when both tests are
    indecisive.
    """
    if E_y == 0.0:
        term = 0.5j * omega * y**2
        d_plus = abs(ydot - 1j * omega * y)
        d_minus = abs(ydot + 1j * omega * y)
        branches = (term, -term)
    else:
        py = np.sqrt(2.0 * E_y - omega**2 * y**2)
        d_plus = abs(ydot - py)
        d_minus = abs(ydot + py)
        term = (0.5 * y * py + (E_y / omega)
                * (np.arcsin(omega * y / np.sqrt(2.0 * E_y))
                   - 0.5 * np.pi))
        branches = (term, -term)
    ratio = d_plus / max(d_minus, 1e-300)
    if ratio < 0.5:
        return branches[0]
    if ratio > 2.0:
        return branches[1]
    # velocity test marginal: fall back to the decay requirement
    for b in branches:
        if b.imag >= -1e-10 * max(1.0, abs(b)):
            return b
    raise BranchAmbiguity(
        f"velocity ratio {ratio:.3f} marginal and both branches give "
        f"negative Im contribution")


def boundary_term_in(model, traj):
    """In-state boundary term B_i = p x_i + int p_y dy', in closed form."""
    ia = in_asymptotics(traj)
    osc = _osc_action_term(ia.y0, ia.ydot0, traj.params.E_y,
                           traj.params.omega)
    return ia.p * ia.x0 + osc


def boundary_term_out(model, traj):
    """Out-state analogue of B_i, evaluated at t_f with (E, E_y^f)."""
    oa = out_asymptotics(traj)
    E_y_f = traj.params.E_y_f
    if E_y_f is None:
        E_y_f = float(oa.E_y_f.real)
    osc = _osc_action_term(oa.y0, oa.ydot0, E_y_f, traj.params.omega)
    return oa.q * oa.x0 + osc


def suppression_exponent(model, traj):
    """F = 2 Im(S + B_i) - 2 E Im(t_i); minus 2 Im B_f for exclusive runs.

    The 2 E Im(t_i) subtraction removes the secular energy phase picked up
    by S + B_i on the elevated in-segment, making F independent of the
    contour height (for a real classical solution F then vanishes on any
    contour).
    """
    val = action(model, traj) + boundary_term_in(model, traj)
    if traj.params.bc_kind == "exclusive":
        val = val - boundary_term_out(model, traj)
    h = float(np.imag(traj.contour.points[0]))
    return 2.0 * float(np.imag(val)) - 2.0 * traj.params.E * h


def theta_T_params(traj, imag_tol=1e-6):
    """Real in-state parameters (T, theta) of the asymptotic form.

    T is minus the imaginary part of the drift line continued to the real
    axis, divided by the momentum (the Legendre dual of E for the
    height-invariant suppression exponent); theta follows from
    a* = abar exp(-2 omega T - theta).
    """
    ia = in_asymptotics(traj)
    w = traj.params.omega
    if abs(ia.p.imag) > imag_tol * abs(ia.p):
        raise ComplexParams(f"p_x has imaginary part {ia.p.imag:.3e}")
    T = -ia.x_intercept.imag / ia.p.real
    prod = ia.a * ia.abar
    if abs(prod.imag) > imag_tol * max(abs(prod), 1e-30):
        raise ComplexParams(f"a*abar not real: {prod:.3e}")
    theta = -2.0 * w * T + np.log(abs(ia.abar) / abs(ia.a))
    phase = np.angle(ia.a) + np.angle(ia.abar)
    phase = (phase + np.pi) % (2.0 * np.pi) - np.pi
    return float(T), float(theta), float(phase)


def energy_samples(model, traj):
    """Complex energy at interval midpoints (conservation diagnostic)."""
    t = traj.contour.points
    X = traj.x
    h = np.diff(t)
    v = np.diff(X, axis=0) / h[:, None]
    xm = 0.5 * (X[:-1] + X[1:])
    E = 0.5 * np.sum(v * v, axis=1) + model.V(xm[:, 0], xm[:, 1]) \
        - 1j * traj.params.eps * model.f(xm[:, 0], xm[:, 1])
    return E


# ----------------------------------------------------------------------
# linearized perturbations and the prefactor
# ----------------------------------------------------------------------

def _free_pert_back(dxf, dvf, tf, t, omega):
    """Free linearized evolution (drift + oscillator) from (dxf, dvf)."""
    dt = t - tf
    x = dxf[0] + dvf[0] * dt
    y = dxf[1] * np.cos(omega * dt) + (dvf[1] / omega) * np.sin(omega * dt)
    return np.array([x, y])


def linear_perturbations(model, traj, vel_floor=1e-8):
    """Backward-integrated perturbation pair with canonical Cauchy data.

    Cauchy data at t_f:  dx1 = 0,      dx1dot = (-ydot_f/xdot_f, 1)
                         dx2 = (0, 1), dx2dot = (-w^2 y_f/xdot_f, 0).
    Both satisfy the linearized (epsilon-modified) equations; integration
    runs node-by-node with the same three-point stencil as the solver, so
    the discrete symplectic pairing is conserved exactly.
    """
    pr = traj.params
    w = pr.omega
    t = traj.contour.points
    X = traj.x
    N = len(t)
    oa = out_asymptotics(traj)
    if abs(oa.q) < vel_floor:
        raise DegenerateFinalVelocity(f"|xdot_f| = {abs(oa.q):.2e}")

    seeds = (
        (np.array([0.0, 0.0], complex),
         np.array([-oa.ydot0 / oa.q, 1.0], complex)),
        (np.array([0.0, 1.0], complex),
         np.array([-w**2 * oa.y0 / oa.q, 0.0], complex)),
    )

    hm_all = t[1:-1] - t[:-2]
    hp_all = t[2:] - t[1:-1]
    hs_all = hm_all + hp_all
    hxx, hxy, hyy = model.hess_mod(X[1:-1, 0], X[1:-1, 1], pr.eps)

    outs = []
    for dxf, dvf in seeds:
        d = np.empty((N, 2), complex)
        d[N - 1] = _free_pert_back(dxf, dvf, t[-1], t[-1], w)
        d[N - 2] = _free_pert_back(dxf, dvf, t[-1], t[-2], w)
        for k in range(N - 2, 0, -1):
            hm, hp, hs = hm_all[k - 1], hp_all[k - 1], hs_all[k - 1]
            s = 0.5 * hm * hp
            wm = hp / hs
            wp = hm / hs
            Hd = np.array([hxx[k - 1] * d[k, 0] + hxy[k - 1] * d[k, 1],
                           hxy[k - 1] * d[k, 0] + hyy[k - 1] * d[k, 1]])
            d[k - 1] = (d[k] - s * Hd - wp * d[k + 1]) / wm
        outs.append(d)
    d1, d2 = outs

    ia = in_asymptotics(traj)
    incr = []
    for d in (d1, d2):
        al, alb = _osc_coeffs(d[0, 1], d[1, 1], t[0], t[1], w)
        dy, dydot = _osc_eval(al, alb, t[0], w)
        dEy = ia.ydot0 * dydot + w**2 * ia.y0 * dy
        dvx = (d[1, 0] - d[0, 0]) / (t[1] - t[0])
        dE = ia.p * dvx + dEy
        incr.append((dEy, dE))
    return PerturbationPair(dx1=d1, dx2=d2, dEy1=incr[0][0], dEy2=incr[1][0],
                            dE1=incr[0][1], dE2=incr[1][1])


def symplectic_samples(traj, pert):
    """Discrete symplectic pairing of the pair at every interval.

    (v.u_next - u.v_next)/h is exactly conserved by the stencil; constancy
    verifies the backward integration.
    """
    t = traj.contour.points
    h = np.diff(t)
    u, v = pert.dx1, pert.dx2
    W = (np.sum(v[:-1] * u[1:], axis=1)
         - np.sum(u[:-1] * v[1:], axis=1)) / h
    return W


def prefactor(model, traj, pert=None):
    """Tunneling prefactor over hbar^(1/2).

    A = hbar^(1/2) w / sqrt(4 pi Im(dEy1 conj(dEy2))); the returned value
    has the hbar^(1/2) factored out (gamma = 1/2).
    """
    if pert is None:
        pert = linear_perturbations(model, traj)
    disc = float(np.imag(pert.dEy1 * np.conj(pert.dEy2)))
    if not np.isfinite(disc) or disc <= 0.0:
        raise NonPositiveDiscriminant(
            f"Im(dEy1 conj dEy2) = {disc:.3e} (wrong branch, separable "
            "limit, or unstable trajectory at eps = 0)")
    w = traj.params.omega
    return w / np.sqrt(4.0 * np.pi * disc), 0.5, pert


def semiclassical_result(model, traj):
    """All trajectory functionals bundled into a SemiclassicalResult."""
    pr = traj.params
    S = action(model, traj)
    Bi = boundary_term_in(model, traj)
    Bf = 0.0 + 0.0j
    if pr.bc_kind == "exclusive":
        Bf = boundary_term_out(model, traj)
    h = float(np.imag(traj.contour.points[0]))
    F = 2.0 * float(np.imag(S + Bi - Bf)) - 2.0 * pr.E * h
    A, gamma, pert = prefactor(model, traj)
    T, theta, phase = theta_T_params(traj)
    return SemiclassicalResult(
        E=pr.E, E_y=pr.E_y, eps=pr.eps, F=F, A_over_hbar_power=A,
        gamma=gamma, S=S, B_i=Bi, B_f=Bf,
        T_int=interaction_time(model, traj), T=T, theta=theta,
        dEy1=pert.dEy1, dEy2=pert.dEy2, F_phase=phase)
