"""Exception hierarchy.

Two branches matter to callers: :class:`ValidationError` covers malformed or
inconsistent inputs (CLI exit code 2), :class:`SingularityError` covers
numerically singular or degenerate configurations (CLI exit code 3).
"""

from __future__ import annotations


class SwlinkError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SwlinkError):
    """Input is malformed, inconsistent, or violates a precondition."""


class SingularityError(SwlinkError):
    """Computation hit a singular or degenerate configuration."""


# -- validation ---------------------------------------------------------------

class OriginSingularityError(ValidationError):
    """Singular wave kinds evaluated at the expansion origin."""


class DimensionMismatchError(ValidationError):
    """Array dimensions disagree with mode counts or with each other."""


class InconsistentFrequencyError(ValidationError):
    """Operands carry different frequencies."""


class OpenSurfaceError(ValidationError):
    """Surface samples do not form a closed quadrature surface."""


class UndersampledSurfaceError(ValidationError):
    """Surface sampling too coarse for the requested truncation or size."""


class IncompleteShellError(ValidationError):
    """Truncation does not end on a complete degree shell."""


class ZeroNormError(ValidationError):
    """Coefficient vector with zero norm where a direction is required."""


class ZeroPowerError(ValidationError):
    """Accepted power is zero or negative where a normalization is required."""


class OverlappingSpheresError(ValidationError):
    """Transmit and receive sampling spheres intersect."""


class EmptyEnsembleError(ValidationError):
    """Ensemble operation invoked with no scenario entries."""


class ZeroMeasurementError(ValidationError):
    """Calibration requested against a nonpositive average."""


class ParseError(ValidationError):
    """File contents do not conform to the declared format."""


class MissingColumnError(ValidationError):
    """Channel assembly is missing per-mode response recordings."""


class InconsistentGridsError(ValidationError):
    """Response recordings disagree in grid, geometry, or frequency."""


# -- singularities ------------------------------------------------------------

class SingularLoopError(SingularityError):
    """(I - M11) not invertible; the excitation loop has no solution."""


class SingularResponseError(SingularityError):
    """Response matrix too ill-conditioned to invert."""


class ZeroChannelError(SingularityError):
    """Channel matrix is identically zero; every excitation is optimal."""


class CavityResonanceError(SingularityError):
    """Cavity wall hit an interior resonance of the enclosed volume."""


class CancellationCollapseError(SingularityError):
    """Weighted superposition cancelled to (numerically) nothing."""
