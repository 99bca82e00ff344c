"""Exception hierarchy. Every toolkit error maps to CLI exit code 2; plain
I/O failures (OSError) map to exit code 1."""


class SwarmBeamError(Exception):
    """Base class for domain and analysis errors."""

    exit_code = 2


class ConfigurationError(SwarmBeamError):
    """Invalid or inconsistent configuration values."""


class SpacingError(SwarmBeamError):
    """A geometry violates its declared minimum element spacing."""


class SynthesisError(SwarmBeamError):
    """Geometry synthesis exhausted its search budget without a feasible layout."""


class DirectionError(SwarmBeamError):
    """A requested direction lies outside the visible region u^2 + v^2 <= 1."""


class BeamTooWideError(SwarmBeamError):
    """The -3 dB contour of the main lobe is not bracketed inside the grid."""


class ResolutionError(SwarmBeamError):
    """Grid too coarse for a reliable numerical result."""


class InfeasibleTargetError(SwarmBeamError):
    """No element count up to the search limit meets the requested target."""


class ComparabilityError(SwarmBeamError):
    """Designs to be compared do not share frequency and altitude."""
