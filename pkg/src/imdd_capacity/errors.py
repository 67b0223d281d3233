"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations

from typing import Any

__all__ = [
    "ImddError",
    "InvalidChannelError",
    "NumericError",
    "ConvergenceError",
    "RegimeError",
    "ResourceError",
    "DegenerateError",
]


class ImddError(Exception):
    """Base class for all package errors."""


class InvalidChannelError(ImddError, ValueError):
    """Raised when channel parameters violate their preconditions."""


class NumericError(ImddError, ArithmeticError):
    """Raised when a quantity underflows or is otherwise not representable."""


class RegimeError(ImddError, ValueError):
    """Raised when an operation is called outside the constraint regime it supports."""


class ResourceError(ImddError, MemoryError):
    """Raised when a computation would exceed a configured size cap."""


class ConvergenceError(ImddError, RuntimeError):
    """Raised when an iterative solver stops before meeting its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    best : Any, optional
        Best iterate found before giving up, for callers that can use a
        partial answer.
    """

    def __init__(self, message: str, best: Any = None) -> None:
        super().__init__(message)
        self.best = best


class DegenerateError(ImddError, ValueError):
    """Raised when a quantity is ill-posed for the given input (e.g. a one-point law)."""
