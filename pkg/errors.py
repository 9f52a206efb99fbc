"""Exception hierarchy shared by every module of the toolkit."""
from __future__ import annotations


class IsoperimetryError(Exception):
    """Base class for all toolkit errors."""


class InputError(IsoperimetryError, ValueError):
    """Malformed or out-of-range input (bad grids, parameters, files)."""


class DomainError(InputError):
    """A function was evaluated outside of its domain of definition."""


class CurvatureError(InputError):
    """The curvature bound of the input does not match what a check requires."""


class InconsistentCertificateError(IsoperimetryError):
    """Barrier data contradicts the barrier inequalities."""


class ConvergenceError(IsoperimetryError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


__all__ = [
    "IsoperimetryError",
    "InputError",
    "DomainError",
    "CurvatureError",
    "InconsistentCertificateError",
    "ConvergenceError",
]
