"""Exception types shared across the package."""

from __future__ import annotations


class HschError(Exception):
    """Base class for all package errors."""


class ShapeError(HschError, ValueError):
    """Field shapes, component counts or grids are incompatible."""


class DataError(HschError, ValueError):
    """Field samples are unusable (non-finite values)."""


class ParameterError(HschError, ValueError):
    """A physical or numerical parameter violates its invariants."""


class ConfigError(HschError, ValueError):
    """A run configuration could not be parsed or validated.

    Attributes:
        key: the offending configuration key, when known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class FormatError(HschError, ValueError):
    """A snapshot file is malformed."""


class NonConvergenceError(HschError, RuntimeError):
    """An iterative solve exhausted its iteration budget.

    Attributes:
        residual_history: L2 residual norms, one per iteration (initial first).
    """

    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = list(residual_history)


class BlowUpError(HschError, RuntimeError):
    """The solution became non-finite or exceeded the gradient ceiling.

    Attributes:
        last_state: the last state that passed all checks.
    """

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state
