# flowtopo/core/exceptions.py
"""
Exception hierarchy shared by every flowtopo module.

Each error also derives from the closest builtin so callers that only know
about ValueError / LookupError / RuntimeError keep working.
"""

from typing import Optional


class FlowTopoError(Exception):
    """Root of all flowtopo errors."""


class InvalidSpecError(FlowTopoError, ValueError):
    """A parameter set violates a precondition of the operation."""


class DivergenceError(FlowTopoError, ArithmeticError):
    """Raised when an integrator produces a non-finite state."""

    def __init__(self, step: int, message: Optional[str] = None):
        self.step = step
        super().__init__(message or f"Non-finite state encountered at step {step}")


class IntersectionConsistencyError(FlowTopoError, RuntimeError):
    """Intersection outcomes contradict monotonicity in the scale."""


class FiltrationOrderError(FlowTopoError, ValueError):
    """A simplex appears before (or without) one of its faces."""


class DominantClassNotFoundError(FlowTopoError, LookupError):
    """No finite persistence pair exists in the requested dimension."""


class PhaseOrderError(FlowTopoError, ValueError):
    """Phase samples are not non-decreasing."""


class ShapeMismatchError(FlowTopoError, ValueError):
    """Two inputs that must be aligned have different shapes."""


class CsvParseError(FlowTopoError, ValueError):
    """A CSV file could not be parsed; `line` is 1-based."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")
