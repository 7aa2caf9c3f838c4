"""Exception hierarchy. Every error raised on bad data or parameters derives
from :class:`InarError`, which the CLI maps to exit code 2."""


class InarError(Exception):
    pass


class DomainError(InarError, ValueError):
    """Parameter or argument outside its admissible domain."""


class DegenerateParameterError(InarError, ValueError):
    pass


class DegenerateSeriesError(InarError, ValueError):
    """The series carries no information for the requested estimator
    (constant lagged values, zero variance, all zeros, ...)."""


class EstimationError(InarError, ArithmeticError):
    """A closed-form estimator hit a non-positive or zero denominator."""


class ConvergenceError(InarError, RuntimeError):
    pass


class SeriesFormatError(InarError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SingularMatrixError(InarError, ArithmeticError):
    pass
