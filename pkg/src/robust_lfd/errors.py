"""Exception types shared across the solvers.

The hierarchy mirrors how callers need to react: input problems are
``ValueError`` subclasses (reject the request), solver problems are
``RuntimeError`` subclasses (the request was sane but no solution was
produced).
"""
from __future__ import annotations

__all__ = [
    "DimensionMismatchError",
    "ParameterError",
    "DegenerateDensityError",
    "DomainError",
    "ConfigError",
    "InfeasibleClassError",
    "ClassOverlapError",
    "ConvergenceError",
    "RateUnboundedWarning",
]


class DimensionMismatchError(ValueError):
    """Two grid quantities do not live on the same grid / have wrong length."""


class ParameterError(ValueError):
    """A scalar parameter violates its documented range."""


class DegenerateDensityError(ValueError):
    """A density has zero (or negative) total mass where positive mass is required."""


class DomainError(ValueError):
    """An evaluation point lies outside the grid domain."""


class ConfigError(ValueError):
    """A scenario config fails validation; ``path`` points at the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.detail = message


class InfeasibleClassError(RuntimeError):
    """The uncertainty classes admit no solution (e.g. radii too large, empty bracket)."""


class ClassOverlapError(InfeasibleClassError):
    """The two uncertainty classes overlap, so no separating test exists."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget without meeting tolerance."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class RateUnboundedWarning(UserWarning):
    """The Legendre-transform maximization hit the tilt-parameter boundary."""
