"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SglError(Exception):
    """Base class for all library errors."""


class ParseError(SglError, ValueError):
    """Expression text outside the grammar.  ``position`` is a 0-based offset."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DomainError(SglError, ValueError):
    """A precondition on the mathematical input failed (constant P, zero function, ...)."""


class ReliabilityError(SglError, ArithmeticError):
    """A numerical result could not be certified (truncation too short, tail too large)."""


class StageError(SglError):
    """Wraps a failure inside a multi-stage computation with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
