"""Two-dimensional waveguide model and its unstable periodic orbit.

The potential is a harmonic guide along x crossed by a Gaussian ridge,

    V(x, y) = omega^2 y^2 / 2 + exp(-(x + y)^2 / 2),

with a saddle point of height 1 at the origin.  Everything here is an
entire function of both coordinates, so all evaluations accept complex
arguments and vectorize over numpy arrays.

The ridge top supports a family of unstable periodic orbits (oscillations
along the stable saddle direction).  ``find_sphaleron`` locates the orbit
at a given energy by Newton shooting from a zero-velocity turning point and
returns it together with its Floquet data (period, Lyapunov exponent,
monodromy matrix).
"""

import numpy as np
from dataclasses import dataclass, field

from .errors import EnergyOutOfRange, NoConvergence

OMEGA_DEFAULT = 0.5


@dataclass(frozen=True)
class PotentialModel:
    """Waveguide potential with transverse frequency ``omega``.

    The barrier amplitude and width are fixed at 1 (dimensionless units).
    """

    omega: float = OMEGA_DEFAULT

    # -- potential -----------------------------------------------------

    def V(self, x, y):
        return 0.5 * self.omega**2 * y**2 + np.exp(-0.5 * (x + y) ** 2)

    def grad(self, x, y):
        """Gradient (dV/dx, dV/dy)."""
        u = x + y
        g = -u * np.exp(-0.5 * u**2)
        return g, self.omega**2 * y + g

    def hess(self, x, y):
        """Hessian entries (Vxx, Vxy, Vyy); the matrix is symmetric."""
        u = x + y
        h = (u**2 - 1.0) * np.exp(-0.5 * u**2)
        return h, h, self.omega**2 + h

    # -- interaction weight f = barrier profile ------------------------

    def f(self, x, y):
        return np.exp(-0.5 * (x + y) ** 2)

    def f_grad(self, x, y):
        u = x + y
        g = -u * np.exp(-0.5 * u**2)
        return g, g

    def f_hess(self, x, y):
        u = x + y
        h = (u**2 - 1.0) * np.exp(-0.5 * u**2)
        return h, h, h

    # -- modified potential V - i eps f ---------------------------------

    def grad_mod(self, x, y, eps):
        """Gradient of V - i*eps*f (the regularized potential)."""
        u = x + y
        e = np.exp(-0.5 * u**2)
        g = -u * e
        return g - 1j * eps * g, self.omega**2 * y + g - 1j * eps * g

    def hess_mod(self, x, y, eps):
        u = x + y
        h = (u**2 - 1.0) * np.exp(-0.5 * u**2)
        hm = h - 1j * eps * h
        return hm, hm, self.omega**2 + hm


# -- spec-level point wrappers ------------------------------------------


def potential_eval(model, point):
    """V at a complex 2-vector ``point = (x, y)``."""
    return model.V(point[0], point[1])


def potential_grad(model, point):
    return np.array(model.grad(point[0], point[1]))


def potential_hess(model, point):
    hxx, hxy, hyy = model.hess(point[0], point[1])
    return np.array([[hxx, hxy], [hxy, hyy]])


def interaction_weight(model, point):
    return model.f(point[0], point[1])


def saddle_frequencies(omega):
    """Normal-mode data of the saddle at the origin.

    Returns ``(omega_plus, omega_minus, alpha)``: the stable oscillation
    frequency, the unstable growth rate, and the rotation angle of the
    stable/unstable axes relative to (x, y),

        omega_pm^2 = +-(omega^2/2 - 1) + sqrt(omega^4/4 + 1),
        alpha = (1/2) arcctg(omega^2 / 2).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    root = np.sqrt(omega**4 / 4.0 + 1.0)
    wp = np.sqrt((omega**2 / 2.0 - 1.0) + root)
    wm = np.sqrt(-(omega**2 / 2.0 - 1.0) + root)
    alpha = 0.5 * np.arctan2(2.0, omega**2)
    return wp, wm, alpha


# -- fixed-step RK4 -----------------------------------------------------


def rk4(deriv, state, t0, t1, n_steps):
    """Integrate ``dstate/dt = deriv(t, state)`` with fixed-step RK4."""
    h = (t1 - t0) / n_steps
    t = t0
    s = state
    for _ in range(n_steps):
        k1 = deriv(t, s)
        k2 = deriv(t + 0.5 * h, s + 0.5 * h * k1)
        k3 = deriv(t + 0.5 * h, s + 0.5 * h * k2)
        k4 = deriv(t + h, s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
    return s


@dataclass
class SphaleronData:
    """Periodic orbit on the ridge top plus its Floquet data."""

    energy: float
    period: float                 # T_sph
    lyapunov: float               # beta_tilde > 0
    beta: float                   # beta = T_sph * beta_tilde
    omega_plus: float
    omega_minus: float
    alpha: float
    turning_point: np.ndarray     # configuration with zero velocity
    orbit_t: np.ndarray = field(repr=False)
    orbit_x: np.ndarray = field(repr=False)   # (n, 2) positions
    orbit_v: np.ndarray = field(repr=False)   # (n, 2) velocities
    monodromy: np.ndarray = field(repr=False)
    monodromy_det: float = 1.0

    def closure_defect(self):
        return float(np.max(np.abs(self.orbit_x[-1] - self.orbit_x[0])))


def _eom(model):
    def deriv(t, s):
        gx, gy = model.grad(s[0], s[1])
        return np.array([s[2], s[3], -gx, -gy])
    return deriv


def _turning_point(model, E, phi):
    """Zero-velocity point at angle phi from the saddle with V = E."""
    d = np.array([np.cos(phi), np.sin(phi)])

    def g(r):
        return model.V(r * d[0], r * d[1]) - E

    r_hi = 1e-3
    while g(r_hi) < 0 and r_hi < 50.0:
        r_hi *= 1.5
    if g(r_hi) < 0:
        raise EnergyOutOfRange(f"no V = E point along phi = {phi}")
    from scipy.optimize import brentq
    r = brentq(g, 0.0, r_hi, xtol=1e-14)
    return r * d


def _shoot_half(model, E, phi, T_half, n_steps):
    p0 = _turning_point(model, E, phi)
    s = rk4(_eom(model), np.array([p0[0], p0[1], 0.0, 0.0]), 0.0, T_half,
            n_steps)
    return s[2:]  # final velocity


def _orbit_newton(model, E, phi, T_half, n_steps, tol, max_iter):
    """Newton iteration for the rest-to-rest shooting problem."""
    for _ in range(max_iter):
        v = _shoot_half(model, E, phi, T_half, n_steps)
        if np.max(np.abs(v)) < tol:
            return phi, T_half
        dphi, dT = 1e-7, 1e-7
        v1 = _shoot_half(model, E, phi + dphi, T_half, n_steps)
        v2 = _shoot_half(model, E, phi, T_half + dT, n_steps)
        J = np.column_stack([(v1 - v) / dphi, (v2 - v) / dT])
        try:
            step = np.linalg.solve(J, -v)
        except np.linalg.LinAlgError:
            raise NoConvergence("singular shooting Jacobian")
        # keep steps moderate; the shooting map is stiff
        scale = min(1.0, 0.5 / max(np.max(np.abs(step)), 1e-30))
        phi += scale * step[0]
        T_half += scale * step[1]
        if not np.isfinite(phi) or not np.isfinite(T_half) or T_half <= 0:
            raise NoConvergence("shooting left the valid domain")
    raise NoConvergence(f"sphaleron shooting failed at E = {E}")


def find_sphaleron(model, E, steps_per_period=4000, tol=1e-9, max_iter=40):
    """Locate the unstable periodic orbit at total energy ``E``.

    Newton shooting on (turning-point angle, half period), launched from a
    zero-velocity point on the energy contour near the saddle.  By time
    reversal a trajectory connecting two rest points retraces itself, so
    the half-period rest condition closes the orbit.

    Raises
    ------
    EnergyOutOfRange
        if ``E <= 1`` (the saddle height).
    NoConvergence
        if the shooting Newton fails; for large E this marks the upper
        existence bound of the orbit.
    """
    if E <= 1.0:
        raise EnergyOutOfRange("sphaleron requires E > 1")
    wp, wm, alpha = saddle_frequencies(model.omega)

    # stable eigenvector of the saddle Hessian
    hxx, hxy, hyy = model.hess(0.0, 0.0)
    Hs = np.array([[hxx, hxy], [hxy, hyy]])
    w, vecs = np.linalg.eigh(Hs)
    e_plus = vecs[:, np.argmax(w)]
    phi0 = float(np.arctan2(e_plus[1], e_plus[0]))
    T0 = np.pi / wp

    n_steps = max(steps_per_period // 2, 1000)
    try:
        phi, T_half = _orbit_newton(model, E, phi0, T0, n_steps, tol,
                                    max_iter)
    except NoConvergence:
        # continuation in energy from the harmonic neighbourhood
        phi, T_half = phi0, T0
        for Ei in np.arange(1.0 + 0.01, E, 0.02):
            phi, T_half = _orbit_newton(model, Ei, phi, T_half, n_steps,
                                        tol, max_iter)
        phi, T_half = _orbit_newton(model, E, phi, T_half, n_steps, tol,
                                    max_iter)

    T_sph = 2.0 * T_half
    p0 = _turning_point(model, E, phi)

    # one full period with the monodromy matrix riding along
    n = 2 * n_steps

    def deriv_full(t, s):
        x, v, M = s[:2], s[2:4], s[4:].reshape(4, 4)
        hxx, hxy, hyy = model.hess(x[0], x[1])
        A = np.zeros((4, 4))
        A[0, 2] = A[1, 3] = 1.0
        A[2, 0] = -hxx
        A[2, 1] = A[3, 0] = -hxy
        A[3, 1] = -hyy
        gx, gy = model.grad(x[0], x[1])
        return np.concatenate([v, [-gx, -gy], (A @ M).ravel()])

    orbit_t = np.linspace(0.0, T_sph, n + 1)
    orbit_x = np.empty((n + 1, 2))
    orbit_v = np.empty((n + 1, 2))
    s = np.concatenate([p0, [0.0, 0.0], np.eye(4).ravel()])
    orbit_x[0], orbit_v[0] = s[:2], s[2:4]
    h = T_sph / n
    # The cumulative monodromy spans a dynamic range e^{2 beta} ~ 1e20, so
    # its determinant drowns in roundoff; accumulate per-step determinants
    # (each an O(1) one-step propagator) for the symplecticity check.
    det_accum = 1.0
    for k in range(n):
        s_step = np.concatenate([s[:4], np.eye(4).ravel()])
        s_step = rk4(deriv_full, s_step, orbit_t[k], orbit_t[k] + h, 1)
        det_accum *= np.linalg.det(s_step[4:].reshape(4, 4))
        M_prev = s[4:].reshape(4, 4)
        s = np.concatenate(
            [s_step[:4], (s_step[4:].reshape(4, 4) @ M_prev).ravel()])
        orbit_x[k + 1], orbit_v[k + 1] = s[:2], s[2:4]
    M = s[4:].reshape(4, 4)

    lam = np.linalg.eigvals(M)
    lam_max = np.max(np.abs(lam))
    beta = float(np.log(lam_max))
    return SphaleronData(
        energy=E, period=float(T_sph), lyapunov=beta / T_sph, beta=beta,
        omega_plus=float(wp), omega_minus=float(wm), alpha=float(alpha),
        turning_point=p0, orbit_t=orbit_t, orbit_x=orbit_x, orbit_v=orbit_v,
        monodromy=M, monodromy_det=float(det_accum),
    )


def sphaleron_energy_ceiling(model, E_start=1.05, dE=0.05, E_max=6.0):
    """Continue the orbit upward in E until shooting fails.

    The upper existence bound is discovered, not assumed; returns the last
    energy at which the orbit was found.
    """
    last = None
    E = E_start
    while E < E_max:
        try:
            last = find_sphaleron(model, E)
        except NoConvergence:
            break
        E += dE
    if last is None:
        raise NoConvergence("no sphaleron found at the starting energy")
    return last.energy
