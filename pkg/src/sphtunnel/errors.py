"""Exception types shared across the package."""


class SphtunnelError(Exception):
    """Base class for all package errors."""


class EnergyOutOfRange(SphtunnelError):
    """Requested energy outside the range where the object exists."""


class NoConvergence(SphtunnelError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularBlock(SphtunnelError):
    """A pivot block of the linearized system is numerically singular."""


class BadDescriptor(SphtunnelError):
    """Contour descriptor with non-positive extents or too few samples."""


class ContinuationStuck(SphtunnelError):
    """Parameter continuation aborted below the minimum step size."""

    def __init__(self, message, last_good=None, solution=None):
        super().__init__(message)
        self.last_good = last_good
        self.solution = solution


class BranchAmbiguity(SphtunnelError):
    """Neither branch of the oscillator action passes the decay test."""


class DegenerateFinalVelocity(SphtunnelError):
    """|xdot_f| too small to set up the prefactor Cauchy data."""


class NonPositiveDiscriminant(SphtunnelError):
    """The prefactor discriminant Im(dEy1 * conj(dEy2)) is not positive."""


class ComplexParams(SphtunnelError):
    """Extracted (T, theta) carry imaginary parts above tolerance."""


class NotInSphaleronRegime(SphtunnelError):
    """epsilon-scaling of the prefactor is inconsistent with E > E_c."""


class SingularFitFailure(SphtunnelError):
    """The inverse-square-root endpoint fit does not describe the data."""


class NonlinearFit(SphtunnelError):
    """Data that should be linear in the fitting window is not."""


class TopologyUnreachable(SphtunnelError):
    """The regularization walk ends before the requested crossing."""


class OutsidePlateau(SphtunnelError):
    """Final oscillator energy outside the classical-decay window."""


class FitDegenerate(SphtunnelError):
    """Fit input points are indistinguishable within tolerance."""


class ClosedIncomingChannel(SphtunnelError):
    """The requested incoming channel is energetically closed."""


class BasisTooSmall(SphtunnelError):
    """Channel basis too small: flux unitarity defect above threshold."""


class DegenerateSamples(SphtunnelError):
    """Not enough distinct samples for the requested fit."""


class MissingBranch(SphtunnelError):
    """A comparison requires a branch table that has not been computed."""


class ConfigError(SphtunnelError):
    """Invalid run configuration."""
