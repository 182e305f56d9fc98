"""
errors.py
Exception hierarchy shared by the game model, solvers, verifier and CLI.
"""


class NashEvoError(Exception):
    """Base class for every error raised by nash_evo."""


class DimensionError(NashEvoError, ValueError):
    """A profile, state or control does not match the declared game dimensions."""


class ModelDefectError(NashEvoError, ArithmeticError):
    """The game model produced a non-finite state or cost."""


class EncodingRangeError(NashEvoError, ValueError):
    """A value cannot be represented by the chromosome encoding."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SelectionError(NashEvoError, ValueError):
    """Roulette selection received fitness values it cannot draw from."""


class GameSpecError(NashEvoError, ValueError):
    """Invalid parameters for an LQ game or a built-in template."""


class SingularSystemError(NashEvoError, ArithmeticError):
    """The stacked first-order system of an LQ game has no unique solution."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class SolverAbortedError(NashEvoError):
    """A solver run stopped on a model defect; carries the trace recorded so far."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class ConfigError(NashEvoError, ValueError):
    """Configuration could not be parsed or failed validation."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line
