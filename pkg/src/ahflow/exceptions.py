"""
Exceptions raised by ahflow.

Non-convergence of an iteration is not an error: it is reported through the
terminal status of the iteration trace.
"""
from typing import Optional


class AhflowError(Exception):
    """Base class of every error raised by the package."""


class ConfigurationError(AhflowError, ValueError):
    """Invalid parameters, mesh sizes or element/mesh combinations."""


class MeshError(AhflowError, ValueError):
    """A triangulation failed one of its validity checks."""


class DimensionError(AhflowError, ValueError):
    """Operand sizes do not match."""


class FactorizationError(AhflowError, RuntimeError):
    """A sparse factorization hit a (structurally or numerically) zero pivot."""

    def __init__(self, message: str, pivot_row: Optional[int] = None):
        self.pivot_row = pivot_row
        if pivot_row is not None:
            message = f"{message} (pivot row {pivot_row})"
        super().__init__(message)
