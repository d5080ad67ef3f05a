"""Exception types raised across the package.

Everything that signals bad input derives from ``ValidationError`` (a
``ValueError``) so callers such as the CLI can map it to a single exit code.
"""


class PoissonPasteError(Exception):
    pass


class ValidationError(PoissonPasteError, ValueError):
    pass


class EmptyRegion(ValidationError):
    pass


class BorderViolation(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class MissingNeighborValue(ValidationError):
    pass


class PlacementOutOfBounds(ValidationError):
    pass


class EmptyMask(ValidationError):
    pass


class DegenerateTransform(ValidationError):
    pass


class PatchTooLarge(ValidationError):
    pass


class NoValidPlacement(ValidationError):
    pass


class OverlapViolation(ValidationError):
    pass


class NoDonorInstances(ValidationError):
    pass


class UnsupportedFormat(ValidationError):
    pass


class DecodeError(ValidationError):
    pass


class SchemaViolation(ValidationError):
    def __init__(self, message, index=None, field=None):
        super().__init__(message)
        self.index = index
        self.field = field


class NotConverged(PoissonPasteError):
    """The iterative solve stopped at ``max_iter`` above tolerance.

    ``result`` holds the best available output (an image for the fill and
    blend helpers) and ``report`` the matching :class:`SolveReport`.
    """

    def __init__(self, message, result=None, report=None):
        super().__init__(message)
        self.result = result
        self.report = report
