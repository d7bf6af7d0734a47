"""Exception types shared across the stack."""


class StackError(Exception):
    """Base class for all errors raised by this package."""


class BoundsError(StackError):
    """A position or index fell outside the grid it was used with."""


class DomainError(StackError):
    """An input value was outside the mathematical domain of an operation."""


class ParameterError(StackError):
    """A configuration value or call argument was invalid."""


class CalibrationError(StackError):
    """Encoder calibration received degenerate measurements."""


class GoalError(StackError):
    """A navigation goal is occupied or inside the inflation radius."""


class NoPathError(StackError):
    """The start cell cannot reach the goal on the planning grid."""


class FormatError(StackError):
    """A file could not be parsed.  Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
