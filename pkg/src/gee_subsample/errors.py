"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: :class:`DataError` for anything wrong with input files or panel
shape, :class:`NumericalError` for failures inside the estimation routines.
"""


class GeeError(Exception):
    """Base class for all package errors."""


class DataError(GeeError):
    """Malformed or inconsistent input data."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class BalanceError(DataError):
    def __init__(self, message: str, subject_id: str | None = None):
        super().__init__(message)
        self.subject_id = subject_id


class EmptyPanelError(DataError):
    pass


class ConfigError(GeeError):
    """Invalid configuration values (bad enum, out-of-range size, ...)."""


class NumericalError(GeeError):
    """Base class for failures during estimation."""


class DomainError(NumericalError):
    pass


class NumericRangeError(NumericalError):
    pass


class DegenerateVarianceError(NumericalError):
    pass


class InsufficientDataError(NumericalError):
    pass


class SingularityError(NumericalError):
    """A matrix that must be inverted is singular or not positive-definite."""


class DivergenceError(NumericalError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class PilotError(NumericalError):
    pass


class DegenerateScoresError(NumericalError):
    pass
