"""Exception hierarchy shared by every subsep module."""

from typing import Optional, Sequence


class SubsepError(Exception):
    """Base class. ``stage`` names the separation stage that raised, if any."""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        message = super().__str__()
        if self.stage:
            return f"[{self.stage}] {message}"
        return message


class ParameterError(SubsepError, ValueError):
    """A configuration value violates its documented range."""


class SizeError(SubsepError, ValueError):
    """A signal is too short for the requested operation."""


class DomainError(SubsepError, ValueError):
    """An abscissa or derivative value lies outside the admissible domain."""

    def __init__(self, message: str, index: Optional[int] = None, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.index = index


class DimensionError(SubsepError, ValueError):
    """Operand shapes do not agree."""


class CapacityError(SubsepError, ValueError):
    """Fewer knots were requested than curvature critical points were found."""

    def __init__(self, message: str, count: int, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.count = count


class ConditioningError(SubsepError, ArithmeticError):
    """A regularized system could not be factorized."""

    def __init__(self, message: str, lambda_: float, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.lambda_ = lambda_


class NumericError(SubsepError, ArithmeticError):
    """Non-finite values appeared inside an iteration."""


class RankError(SubsepError, ValueError):
    """Every spanning vector fell below the rank tolerance."""


class DictionaryError(SubsepError, ValueError):
    """The solver dictionary has unusable (all-zero) columns."""

    def __init__(self, message: str, columns: Sequence[int], stage: Optional[str] = None):
        super().__init__(message, stage)
        self.columns = tuple(columns)


class SignalFormatError(SubsepError, ValueError):
    """A signal CSV file does not follow the `t,value` format."""


class SweepError(SubsepError):
    """Every point of a q sweep failed."""


class BasisIndexError(SubsepError, IndexError):
    """A B-spline index lies outside 0..M-1."""
