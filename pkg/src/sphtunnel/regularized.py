"""Epsilon-regularized trajectory families and the sphaleron limit.

Above the critical energy the eps -> 0 limit of the regularized family
yields the sphaleron-driven suppression exponent and prefactor,

    F_sph = lim F_eps,
    A_sph = hbar^(1/2) lim A_eps / (eps sqrt(-4 pi dRe T_int/d eps)),

with F_eps the original action evaluated on the modified trajectory.  The
family also carries the Legendre structure dF_eps/dtau_+ = -2 eps used as
a consistency check, and its entries feed the uniform-approximation and
exclusive-process machinery.
"""

import numpy as np
from dataclasses import dataclass, field

from .bvp import continue_to
from .observables import (suppression_exponent, interaction_time,
                          prefactor)
from .errors import NotInSphaleronRegime, NonPositiveDiscriminant


@dataclass
class FamilyEntry:
    eps: float
    F: float                    # 2 Im(S + B_i), original action
    A_over_sqrt_hbar: float     # prefactor / hbar^(1/2); nan if diverged
    tau_plus: float             # Re T_int
    T_int: complex
    traj: object = field(repr=False, default=None)
    dEy1: complex = 0.0
    dEy2: complex = 0.0


@dataclass
class EpsilonFamily:
    E: float
    E_y: float
    entries: list               # ordered along the continuation

    @property
    def eps(self):
        return np.array([e.eps for e in self.entries])

    @property
    def F(self):
        return np.array([e.F for e in self.entries])

    @property
    def A(self):
        return np.array([e.A_over_sqrt_hbar for e in self.entries])

    @property
    def tau(self):
        return np.array([e.tau_plus for e in self.entries])

    def table(self):
        """Rows (eps, F_eps, A/sqrt(hbar), tau_plus, Re T_int)."""
        return np.column_stack([self.eps, self.F, self.A, self.tau,
                                [e.T_int.real for e in self.entries]])


def _entry(model, traj):
    F = suppression_exponent(model, traj)
    Ti = interaction_time(model, traj)
    try:
        A, gamma, pert = prefactor(model, traj)
        dEy1, dEy2 = pert.dEy1, pert.dEy2
    except NonPositiveDiscriminant:
        A, dEy1, dEy2 = np.nan, 0.0, 0.0
    return FamilyEntry(eps=traj.params.eps, F=F, A_over_sqrt_hbar=A,
                       tau_plus=float(Ti.real), T_int=complex(Ti),
                       traj=traj, dEy1=dEy1, dEy2=dEy2)


def build_family(model, seed, eps_grid, tol=1e-10, keep_traj=True,
                 callback=None):
    """Continue a converged solution through an epsilon grid.

    ``seed`` must be converged at (or near) the first grid value; each
    converged member carries F_eps (the original action on the modified
    trajectory), the modified prefactor and the interaction time.
    """
    entries = []
    cur = seed
    for e in eps_grid:
        cur = continue_to(model, cur, {"eps": float(e)}, tol=tol)
        ent = _entry(model, cur)
        if not keep_traj:
            ent.traj = None if e != eps_grid[-1] else cur
        entries.append(ent)
        if callback is not None:
            callback(ent)
    fam = EpsilonFamily(E=cur.params.E, E_y=cur.params.E_y,
                        entries=entries)
    fam.last = cur
    return fam


def default_eps_grid(eps_max=1e-2, eps_min=1e-6, per_decade=10):
    n = int(np.ceil(per_decade * np.log10(eps_max / eps_min))) + 1
    return np.geomspace(eps_max, eps_min, n)


def legendre_residual(family, rel_floor=1e-12):
    """Max relative defect of dF/dtau_+ + 2 eps at interior entries."""
    if len(family.entries) < 3:
        raise ValueError("need at least 3 family entries")
    F, tau, eps = family.F, family.tau, family.eps
    dF = (F[2:] - F[:-2]) / (tau[2:] - tau[:-2])
    defect = np.abs(dF + 2.0 * eps[1:-1]) / np.maximum(
        2.0 * np.abs(eps[1:-1]), rel_floor)
    return float(np.max(defect))


def _window_smallest_eps(family, decades=1.0, n_min=5):
    eps = family.eps
    order = np.argsort(eps)
    eps_min = eps[order[0]]
    sel = np.where(eps <= eps_min * 10.0**decades)[0]
    if len(sel) < n_min:
        sel = order[:n_min]
    return np.array(sorted(sel, key=lambda i: eps[i]))


def sphaleron_prefactor_samples(family):
    """Per-entry estimator A_sph,eps / hbar (finite-eps version of the
    limit formula), computed with log-spaced centered differences of
    tau_+ with respect to eps."""
    eps, A, tau = family.eps, family.A, family.tau
    order = np.argsort(eps)
    le = np.log(eps[order])
    t = tau[order]
    dtau_dln = np.gradient(t, le)
    dtau_deps = dtau_dln / eps[order]
    vals = np.full(len(eps), np.nan)
    good = dtau_deps < 0
    vals[order[good]] = (A[order[good]]
                         / (eps[order[good]]
                            * np.sqrt(-4.0 * np.pi * dtau_deps[good])))
    return vals


def sphaleron_limit(family, slope_tol=0.1):
    """(F_sph, A_sph/hbar, gamma=1) from the eps -> 0 extrapolation.

    F_eps is fitted with F_sph + c1 eps + c2 eps^2 over the smallest
    decade (the linear law is exact to leading order); the prefactor
    estimator is extrapolated linearly in eps.  Raises
    ``NotInSphaleronRegime`` when A_eps does not scale as eps^(1/2)
    within ``slope_tol`` (the signature of E < E_c).
    """
    sel = _window_smallest_eps(family)
    eps = family.eps[sel]
    F = family.F[sel]
    A = family.A[sel]
    if np.any(~np.isfinite(A)):
        raise NotInSphaleronRegime("prefactor undefined inside the window")
    slope = np.polyfit(np.log(eps), np.log(A), 1)[0]
    if abs(slope - 0.5) > slope_tol:
        raise NotInSphaleronRegime(
            f"A_eps ~ eps^{slope:.3f}, expected eps^0.5 (E < E_c?)")
    co = np.polyfit(eps, F, 2)
    F_sph = float(co[-1])
    samples = sphaleron_prefactor_samples(family)[sel]
    good = np.isfinite(samples)
    co_a = np.polyfit(eps[good], samples[good], 1)
    A_sph = float(co_a[-1])
    return F_sph, A_sph, 1.0


def eps_scaling_slope(family):
    """Log-log slope of A_eps over the smallest decade (diagnostic)."""
    sel = _window_smallest_eps(family)
    eps, A = family.eps[sel], family.A[sel]
    good = np.isfinite(A)
    return float(np.polyfit(np.log(eps[good]), np.log(A[good]), 1)[0])


def linear_law_slope(family):
    """Slope of F_eps vs eps over the smallest decade.

    Near the sphaleron regime this approaches 2/omega_minus.
    """
    sel = _window_smallest_eps(family)
    return float(np.polyfit(family.eps[sel], family.F[sel], 1)[0])
