from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .ddesim import Trajectory


class PllHopfError(Exception):
    """Base exception for the pllhopf package."""

    pass


class ConfigurationError(PllHopfError):
    """Raised when configuration is invalid or cannot be read."""

    pass


class DomainError(PllHopfError):
    """Raised when an input violates a precondition (K < 1, bad step size, ...)."""

    pass


class DegeneracyError(PllHopfError):
    """Raised when a Hopf point is not simple, not transversal, or resonant."""

    pass


class DivergenceError(PllHopfError):
    """Raised when an integration leaves the bounded region.

    The trajectory computed up to the blow-up is kept on ``trajectory``.
    """

    def __init__(self, message: str, trajectory: Trajectory | None = None):
        super().__init__(message)
        self.trajectory = trajectory
