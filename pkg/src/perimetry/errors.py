"""Exception hierarchy shared by every module."""


class PerimetryError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(PerimetryError):
    pass


class SelfIntersection(GeometryError):
    pass


class DegenerateRing(GeometryError):
    pass


class NestingViolation(GeometryError):
    pass


class OverlayFailure(GeometryError):
    pass


class BumpEscapesUniverse(PerimetryError):
    pass


class HeightSelectionFailed(PerimetryError):
    pass


class BudgetExhausted(PerimetryError):
    """Raised when an iterative construction runs out of passes or refinements.

    The best state reached is attached so callers can still report it.
    """

    def __init__(self, message, *, residual=None, result=None, report=None):
        super().__init__(message)
        self.residual = residual
        self.result = result
        self.report = report


class GridTooCoarse(PerimetryError):
    pass


class EmptyLevelSet(PerimetryError):
    pass


class NoAdmissibleLevel(PerimetryError):
    pass


class DetachFailed(PerimetryError):
    def __init__(self, message, lengths=()):
        super().__init__(message)
        self.lengths = list(lengths)


class NonPositiveDensity(PerimetryError):
    pass


class DiscontinuousDensity(PerimetryError):
    pass


class GBoundViolated(PerimetryError):
    pass


class NoAdmissibleRadius(PerimetryError):
    pass


class DensitySpecError(PerimetryError, ValueError):
    pass


class SequenceTooShort(PerimetryError, ValueError):
    pass
