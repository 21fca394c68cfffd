"""Exception types shared across the package."""


class CombDiffusionError(Exception):
    """Base class for all package errors."""


class NonConvergence(CombDiffusionError):
    """A root finder hit its iteration cap."""


class LatticePoint(CombDiffusionError):
    """A quantity is undefined because the momentum sits on the half-integer lattice."""


class TruncationInsufficient(CombDiffusionError):
    """The truncated coefficient table misses more mass than allowed."""

    def __init__(self, message, tail_mass=None):
        super().__init__(message)
        self.tail_mass = tail_mass


class QuadratureFailure(CombDiffusionError):
    """Adaptive quadrature could not reach the requested tolerance."""


class WindowOverflow(CombDiffusionError):
    """The dominant amplitude mass would leave the plane-wave window."""


class StabilityViolation(CombDiffusionError):
    """An explicit time step is too large for the jump rate."""


class WeightBlowup(CombDiffusionError):
    """An importance weight exceeded the allowed magnitude."""


class InsufficientSample(CombDiffusionError):
    """A statistic was requested on too small a sample."""


class ConfigError(CombDiffusionError):
    """A configuration file could not be parsed or validated."""
