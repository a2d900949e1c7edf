"""Bent complex-time contour and its non-uniform lattice.

Tunneling solutions live on a polyline in the complex time plane with
vertices A', A, B, C, D: a long horizontal run at Im t = T_imag (in-region),
a vertical drop to the real axis, and a real-time run split into a densely
sampled interaction window B-C and a coarser out-tail C-D.  Sampling is
uniform within each segment; the lattice is the site set handed to the
boundary-value solver.
"""

import json
import numpy as np
from dataclasses import dataclass, asdict
from scipy.interpolate import CubicSpline

from .errors import BadDescriptor


@dataclass(frozen=True)
class ContourDescriptor:
    """Geometry of the bent contour.

    ``T_before`` is the length of the in-segment A'-A at Im t = T_imag,
    ``T_after`` the total real-time extent B-D of which the first
    ``window`` units form the densely sampled interaction segment B-C.
    ``counts`` holds the number of intervals per segment (A'A, AB, BC, CD)
    and ``t_drop`` the real time of the vertical drop.  ``conjugate``
    mirrors the contour into the lower half plane (used by reality checks).
    """

    T_before: float
    T_imag: float
    T_after: float
    window: float
    counts: tuple
    t_drop: float = 0.0
    conjugate: bool = False

    def validate(self):
        if self.T_before <= 0 or self.T_after <= 0 or self.T_imag < 0:
            raise BadDescriptor("extents must be positive (T_imag >= 0)")
        if not (0 < self.window < self.T_after):
            raise BadDescriptor("window must lie inside (0, T_after)")
        if len(self.counts) != 4 or any(int(c) < 8 for c in self.counts):
            raise BadDescriptor("need 4 segment counts, each >= 8")

    def to_dict(self):
        d = asdict(self)
        d["counts"] = list(int(c) for c in self.counts)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["counts"] = tuple(int(c) for c in d["counts"])
        return cls(**d)


class TimeContour:
    """Sampled contour: vertices, lattice points t_k, per-segment counts."""

    def __init__(self, descriptor):
        descriptor.validate()
        self.descriptor = descriptor
        d = descriptor
        sign = -1.0 if d.conjugate else 1.0
        top = sign * 1j * d.T_imag
        A = d.t_drop + top
        Ap = A - d.T_before
        B = complex(d.t_drop)
        C = B + d.window
        D = B + d.T_after
        self.vertices = (Ap, A, B, C, D)

        pts = []
        slices = []
        start = 0
        for (z0, z1), n in zip(zip(self.vertices[:-1], self.vertices[1:]),
                               d.counts):
            n = int(n)
            if abs(z1 - z0) == 0.0:       # degenerate (T_imag = 0) segment
                slices.append(slice(start, start))
                continue
            seg = z0 + (z1 - z0) * np.arange(n) / n
            pts.append(seg)
            slices.append(slice(start, start + n))
            start += n
        pts.append(np.array([D]))
        self.points = np.concatenate(pts)
        self.segment_slices = tuple(slices)
        self.segment_counts = tuple(
            s.stop - s.start for s in self.segment_slices)

    @property
    def n_points(self):
        return len(self.points)

    @property
    def spacings(self):
        return np.diff(self.points)

    @property
    def arclength(self):
        """Cumulative |dt| along the polyline, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(np.abs(self.spacings))])

    def conjugated(self):
        from dataclasses import replace
        return TimeContour(replace(self.descriptor,
                                   conjugate=not self.descriptor.conjugate))

    def to_dict(self):
        return self.descriptor.to_dict()

    def __eq__(self, other):
        return (isinstance(other, TimeContour)
                and self.descriptor == other.descriptor)

    def __repr__(self):
        d = self.descriptor
        return (f"TimeContour(T_before={d.T_before}, T_imag={d.T_imag}, "
                f"T_after={d.T_after}, N={self.n_points})")


def build_contour(descriptor):
    """Construct the sampled contour from its descriptor."""
    return TimeContour(descriptor)


def refine(contour, factor):
    """Same vertices and spacing profile, ``factor`` x denser sampling."""
    if factor not in (2, 3, 4):
        raise ValueError("refinement factor must be 2, 3 or 4")
    from dataclasses import replace
    d = contour.descriptor
    return TimeContour(replace(
        d, counts=tuple(int(c) * factor for c in d.counts)))


def interpolate_positions(source, positions, target):
    """Cubic interpolation of lattice samples onto another contour.

    Interpolates each component of ``positions`` (shape (N, ...)) in the
    arc-length parameter; the two contours must share their vertices.
    """
    if not np.allclose(source.vertices, target.vertices):
        raise ValueError("contours must share vertices for interpolation")
    s_src = source.arclength
    s_tgt = target.arclength
    spline = CubicSpline(s_src, positions, axis=0)
    out = spline(np.clip(s_tgt, s_src[0], s_src[-1]))
    return out


def descriptor_roundtrip(descriptor):
    """Serialize and parse back; used by the persistence tests."""
    return ContourDescriptor.from_dict(
        json.loads(json.dumps(descriptor.to_dict())))
