"""Exception types shared across the package."""


class NavOffsetError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(NavOffsetError, ValueError):
    """An array does not have the shape required by the block layout."""


class LengthMismatch(DimensionMismatch):
    """Two streams that must be aligned have different lengths."""


class IndexOutOfRange(NavOffsetError, IndexError):
    """A modality or frame index is outside the layout's valid range."""


class SingularSystem(NavOffsetError, ArithmeticError):
    """A symmetric solve failed even after ridge jitter was added."""


class NonFiniteObjective(NavOffsetError, ArithmeticError):
    """The objective became NaN/Inf during fitting (data pathology)."""


class NotConverged(NavOffsetError, RuntimeError):
    """An iterative method hit its iteration cap before reaching tolerance."""


class SingularTemporalBlock(NavOffsetError, ArithmeticError):
    """A temporal weight block is numerically singular and cannot be inverted.

    Carries the index of the offending block (0 = most recent frame).
    """

    def __init__(self, block_index, message=None):
        self.block_index = block_index
        super().__init__(message or f"temporal block {block_index} is numerically singular")


class InvalidProfile(NavOffsetError, ValueError):
    """A terrain profile violates its invariants."""


class TooShort(NavOffsetError, ValueError):
    """A stream is too short for the requested finite-difference stencil."""


class EmptyInput(NavOffsetError, ValueError):
    """An aggregate was requested over zero runs."""
