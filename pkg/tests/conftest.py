"""Shared pytest fixtures for pllhopf tests."""

import json
import os

import pytest

from pllhopf.model import Branch, ModelParams, equilibrium, linearize, nonlinear_coeffs
from pllhopf.spectrum import hopf_points_at

K_REF = 1.05


@pytest.fixture(autouse=True)
def clean_environment():
    """Clean environment variables before each test."""
    original_env = os.environ.copy()
    for key in list(os.environ.keys()):
        if key.startswith("PLLHOPF_"):
            del os.environ[key]
    yield
    os.environ.clear()
    os.environ.update(original_env)


def _nearest_hopf(mu, tau):
    points = [hp for _, hp in hopf_points_at(K_REF, mu, range(0, 7), Branch.MINUS)]
    return min(points, key=lambda hp: abs(hp.tau - tau))


@pytest.fixture(scope="session")
def point_a():
    """Hopf point A (mu = 0.15) on the Re(lambda') > 0 family."""
    return _nearest_hopf(0.15, 7.46197)


@pytest.fixture(scope="session")
def point_b():
    """Hopf point B (mu = 0.3) on the Re(lambda') < 0 family."""
    return _nearest_hopf(0.3, 11.001518)


@pytest.fixture(scope="session")
def point_c():
    """Hopf point C (mu = 0.421) just below the fold of the Re(lambda') > 0 family."""
    return _nearest_hopf(0.421, 7.101329)


@pytest.fixture
def minus_eq():
    """Minus-branch equilibrium at K = 1.05."""
    return equilibrium(K_REF, Branch.MINUS, 0)


@pytest.fixture
def params_a(point_a):
    """Model parameters at point A."""
    return ModelParams(K=K_REF, mu=point_a.mu, tau=point_a.tau)


@pytest.fixture
def lin_a(params_a, minus_eq):
    """Linearization at point A."""
    return linearize(params_a, minus_eq)


@pytest.fixture
def nl_a(params_a, minus_eq):
    """Nonlinear coefficients at point A."""
    return nonlinear_coeffs(params_a, minus_eq)


@pytest.fixture
def config_file(tmp_path):
    """Create a temporary valid config file."""
    config_path = tmp_path / "pllhopf.json"
    with open(config_path, "w", encoding="utf-8") as f:
        json.dump({"K": 1.1, "mu": 0.2, "mu_range": "0.1:0.01:0.2", "n_range": [0, 2]}, f)
    return str(config_path)
