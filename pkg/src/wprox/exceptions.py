"""
Exception hierarchy for wprox.

Every error also derives from the builtin that plain numerical code would raise
for the same situation, so ``except ValueError`` keeps working for callers that
do not care about the finer classes.

Author: wprox developers
"""

from typing import Optional

import numpy as np


class WproxError(Exception):
    """Root of all wprox errors."""


class ConfigurationError(WproxError, ValueError):
    """Shape/arity mismatch or an invalid configuration value."""


class UsageError(WproxError, ValueError):
    """An operation was called on inputs it does not accept."""


class UnsupportedDimensionError(UsageError):
    """The sample-space dimension is not supported by the operation."""


class ScaleError(UsageError):
    """Input too large for an exact oracle."""


class InvalidInputError(UsageError):
    """Input data violates a documented precondition."""


class NumericError(WproxError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""

    def __init__(self, message: str, primitive: Optional[str] = None):
        super().__init__(message)
        self.primitive = primitive

    # the extra constructor arguments must survive pickling across worker processes
    def __reduce__(self) -> tuple:
        return type(self), (str(self), self.primitive)


class DegenerateCoordinateError(NumericError):
    """A sample coordinate has (near) zero variance."""

    def __init__(self, message: str, coordinate: int):
        super().__init__(message, primitive="o2diag")
        self.coordinate = coordinate

    def __reduce__(self) -> tuple:
        return type(self), (str(self), self.coordinate)


class RankDeficiencyError(NumericError):
    """A matrix that must be inverted is singular."""

    def __init__(self, message: str, null_direction: np.ndarray):
        super().__init__(message, primitive="sym_solve")
        self.null_direction = null_direction

    def __reduce__(self) -> tuple:
        return type(self), (str(self), self.null_direction)


class DivergenceError(NumericError):
    """An iterative procedure blew past its divergence guard."""

    def __init__(self, message: str, trace: Optional[list[float]] = None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []

    def __reduce__(self) -> tuple:
        return type(self), (str(self), self.trace)
