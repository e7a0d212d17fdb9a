"""Tests for custom exception handling."""

import numpy as np

from pllhopf.ddesim import Trajectory
from pllhopf.exceptions import (
    ConfigurationError,
    DegeneracyError,
    DivergenceError,
    DomainError,
    PllHopfError,
)


def test_base_exception_hierarchy():
    """Test that all custom exceptions inherit from base."""
    assert issubclass(ConfigurationError, PllHopfError)
    assert issubclass(DomainError, PllHopfError)
    assert issubclass(DegeneracyError, PllHopfError)
    assert issubclass(DivergenceError, PllHopfError)


def test_domain_error():
    """Test DomainError properties."""
    exc = DomainError("K must be > 1")
    assert str(exc) == "K must be > 1"
    assert isinstance(exc, PllHopfError)


def test_divergence_error_without_trajectory():
    """Test that DivergenceError defaults to no trajectory."""
    exc = DivergenceError("blew up")
    assert str(exc) == "blew up"
    assert exc.trajectory is None


def test_divergence_error_keeps_trajectory():
    """Test that the partial trajectory travels with the exception."""
    traj = Trajectory(
        times=np.array([0.0, 0.1]),
        states=np.zeros((2, 2)),
        slopes=np.zeros((2, 2)),
        tau=1.0,
        dt=0.1,
        labels=("x", "v"),
        diverged=True,
    )
    exc = DivergenceError("blew up", trajectory=traj)
    assert exc.trajectory is traj
    assert exc.trajectory.diverged
