"""Exceptions raised by ctcb."""

from typing import Optional, Self


class CtcbError(Exception):
    """Base class for ctcb errors."""


class MarketDataError(CtcbError, ValueError):
    """Market data could not be parsed or violates an invariant."""


class ModelError(CtcbError, ValueError):
    """Model inputs are invalid (degenerate schedules, bad step functions, zero denominators)."""


class SolverError(CtcbError, RuntimeError):
    """A root search or linear solve failed."""

    def __init__(self: Self, message: str, residual: Optional[float] = None) -> None:
        """Keep the residual of the best iterate next to the message."""
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class EmptySelectionError(CtcbError, ValueError):
    """A conditional scenario selected no paths."""
