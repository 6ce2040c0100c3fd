"""
Domain errors raised by the ranking-mixture services.
"""

from typing import Optional


class PLMixError(Exception):
    """Base class for all errors raised by this package."""


class EmbeddingError(PLMixError, ValueError):
    """Raised when a dataset cannot be embedded into pairwise vectors."""


class DisconnectedComparisonGraphError(PLMixError, ValueError):
    """Raised when the weighted comparison graph is not strongly connected."""

    def __init__(self, message: str = "comparison graph disconnected under weights"):
        super().__init__(message)


class ConvergenceError(PLMixError, RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class SocFormatError(PLMixError, ValueError):
    """Raised for malformed PrefLib election files; reports the offending line."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line_number = line_number
