from .centermanifold import LyapunovMap, NormalForm, lyapunov_a, lyapunov_map, solve_eigenfunctions
from .config import RunConfig, build_run_config, load_config
from .core import PllHopfAnalyzer
from .ddesim import (
    HistoryFunction,
    OrbitClass,
    Trajectory,
    Verdict,
    classify_orbit,
    hopf_side_scan,
    integrate_network,
    integrate_subspace,
)
from .exceptions import (
    ConfigurationError,
    DegeneracyError,
    DivergenceError,
    DomainError,
    PllHopfError,
)
from .model import Branch, Equilibrium, ModelParams, equilibrium, linearize, nonlinear_coeffs
from .spectrum import HopfCurve, HopfPoint, check_assumptions, hopf_curves

try:
    from importlib.metadata import version

    __version__ = version("pllhopf")
except Exception:  # pragma: no cover
    __version__ = "0.0.0-dev"

__all__ = [
    "PllHopfAnalyzer",
    "RunConfig",
    "build_run_config",
    "load_config",
    "Branch",
    "Equilibrium",
    "ModelParams",
    "equilibrium",
    "linearize",
    "nonlinear_coeffs",
    "HopfCurve",
    "HopfPoint",
    "check_assumptions",
    "hopf_curves",
    "LyapunovMap",
    "NormalForm",
    "lyapunov_a",
    "lyapunov_map",
    "solve_eigenfunctions",
    "HistoryFunction",
    "OrbitClass",
    "Trajectory",
    "Verdict",
    "classify_orbit",
    "hopf_side_scan",
    "integrate_network",
    "integrate_subspace",
    "PllHopfError",
    "ConfigurationError",
    "DomainError",
    "DegeneracyError",
    "DivergenceError",
]
