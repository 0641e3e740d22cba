"""Exception hierarchy for the twistband toolkit.

The CLI maps these onto exit codes: configuration problems exit 2,
solver failures exit 3, critical-energy rejections exit 4.
"""


class TwistbandError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TwistbandError):
    """Invalid configuration or input file; names the offending field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class TooFewNodesError(ConfigError):
    """Grid spacing too coarse: fewer than the required interior nodes."""


class MaskError(ConfigError):
    """Unreadable or malformed cross-section mask file."""


class SolverError(TwistbandError):
    """Eigen- or linear-solver failure (non-convergence, bad residual)."""


class TrackingAmbiguityError(TwistbandError):
    """Branch tracking could not assign eigenvector frames (grid too coarse)."""


class RefinementFailureError(TwistbandError):
    """Bisection refinement lost its bracket near a degeneracy."""


class CriticalEnergyError(TwistbandError):
    """Requested window energy lies on a critical level."""

    def __init__(self, message, energy=None):
        super().__init__(message)
        self.energy = energy


class CoverageError(TwistbandError):
    """The k-sweep does not reach k_R for the requested energy window."""


class SignConflictError(TwistbandError):
    """Branch slopes disagree in sign on a window interval (delta too large)."""


class MissingBandError(TwistbandError):
    """Eigensolve returned fewer bands than the window ceiling requires."""


class DecayViolationError(TwistbandError):
    """Twist perturbation fails the weighted-decay hypothesis on the truncation."""


class MemoryGuardError(TwistbandError):
    """Requested tube discretization exceeds the unknown-count guard."""
