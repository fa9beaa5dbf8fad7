"""Exception types raised across the package."""


class ChangeSurfaceError(ValueError):
    """Base class for all package errors."""


class IncompleteGrid(ChangeSurfaceError):
    pass


class NonNumeric(ChangeSurfaceError):
    pass


class EmptyFile(ChangeSurfaceError):
    pass


class DegenerateSplit(ChangeSurfaceError):
    pass


class DimensionMismatch(ChangeSurfaceError):
    pass


class NonPositive(ChangeSurfaceError):
    pass


class NotPSD(ChangeSurfaceError):
    pass


class SizeCap(ChangeSurfaceError):
    """Dense computation requested above the configured size cap."""


class NoConvergence(ChangeSurfaceError):
    pass


class DegenerateData(ChangeSurfaceError):
    pass


class EmptyRegime(ChangeSurfaceError):
    """No grid line has enough points where the regime dominates."""


class DegenerateComponent(ChangeSurfaceError):
    pass


class DegenerateDenominator(ChangeSurfaceError):
    pass


class FormatError(ChangeSurfaceError):
    """Serialized model file is malformed or of an unknown version."""
