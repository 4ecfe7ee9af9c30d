"""Exception types raised across the package."""


class ESGError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(ESGError, ValueError):
    pass


class MissingEdgeError(ESGError, KeyError):
    pass


class InvariantViolationError(ESGError):
    """A graph operation would break a structural invariant (e.g. an arrow into the past)."""


class InsufficientDataError(ESGError, ValueError):
    pass


class DegenerateDataError(ESGError, ValueError):
    """A sample block contains a zero-variance column."""


class InvalidConditionerError(ESGError, ValueError):
    pass


class TooShortError(InsufficientDataError):
    pass


class UnknownStructureError(ESGError, KeyError):
    pass


class DataFormatError(ESGError, ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
