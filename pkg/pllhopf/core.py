"""PllHopfAnalyzer: the configured pipeline behind every CLI command."""

import logging
import sys
from typing import Any

import numpy as np

from . import centermanifold, ddesim, spectrum
from .centermanifold import LyapunovMap, lyapunov_a, lyapunov_map
from .config import RunConfig, build_run_config
from .ddesim import (
    DEFAULT_DELAYS,
    SCAN_DELAYS,
    HistoryFunction,
    Trajectory,
    amplitude_law,
    empirical_criticality,
    hopf_side_scan,
    integrate_network,
    integrate_subspace,
)
from .exceptions import DegeneracyError, DomainError
from .model import Branch, Equilibrium, ModelParams, equilibria_table, equilibrium, nonlinear_coeffs
from .spectrum import HopfCurve, HopfPoint, check_assumptions, hopf_curves, hopf_points_at
from .utils import EquilibriumRow, HopfRow, LyapunovRow

logger = logging.getLogger(__name__)

REFERENCE_K = 1.05

# Named Hopf points at K = 1.05: (mu, tau)
REFERENCE_POINTS: dict[str, tuple[float, float]] = {
    "A": (0.15, 7.46197),
    "B": (0.3, 11.001518),
    "C": (0.421, 7.101329),
}

PERIOD_TOL = 0.05
DEFAULT_RELATIVE_OFFSET = 0.01


def tolerance_table() -> dict[str, float]:
    """Tolerance constants in effect, keyed by ``module.NAME``."""
    table = {}
    for module in (spectrum, centermanifold, ddesim):
        short = module.__name__.rsplit(".", 1)[-1]
        for name, value in vars(module).items():
            if name.isupper() and isinstance(value, int | float) and not isinstance(value, bool):
                table[f"{short}.{name}"] = float(value)
    table["core.PERIOD_TOL"] = PERIOD_TOL
    return table


class PllHopfAnalyzer:
    """Run the equilibrium, Hopf, Lyapunov, verification and simulation stages."""

    def __init__(
        self,
        config: RunConfig | None = None,
        config_path: str | None = None,
        config_dict: dict[str, Any] | None = None,
        verbose: bool = False,
    ):
        """
        Initialize the analyzer.

        Args:
            config: Ready-made configuration (takes precedence over the other sources)
            config_path: Path to JSON/YAML configuration file
            config_dict: Direct configuration dictionary
            verbose: Enable debug logging to stderr

        Examples:
            ```python
            analyzer = PllHopfAnalyzer(config_dict={"K": 1.05, "mu_range": "0.1:0.01:0.4"})
            curves = analyzer.hopf_curves()
            ```
        """
        self.verbose = verbose
        self.config = config or build_run_config(config_path=config_path, config_dict=config_dict)

        if verbose:  # pragma: no cover
            logging.basicConfig(
                level=logging.DEBUG,
                format="%(asctime)s %(levelname)s %(name)s %(message)s",
                stream=sys.stderr,
            )

    @property
    def branch(self) -> Branch:
        return Branch(self.config.branch)

    @property
    def n_values(self) -> range:
        lo, hi = self.config.n_range
        return range(lo, hi + 1)

    def equilibria(self) -> list[Equilibrium]:
        return equilibria_table(self.config.K, self.n_values)

    def hopf_curves(self) -> list[HopfCurve]:
        cfg = self.config
        return hopf_curves(cfg.K, cfg.mu_range, self.n_values, self.branch, cfg.workers)

    def lyapunov_map(self, curves: list[HopfCurve] | None = None) -> LyapunovMap:
        curves = self.hopf_curves() if curves is None else curves
        if self.config.published_weights:
            logger.warning("⚠️ Using unit weights on the squared forcing terms of the h-system")
        return lyapunov_map(
            self.config.K,
            curves,
            workers=self.config.workers,
            published_weights=self.config.published_weights,
        )

    def locate_point(self) -> HopfPoint:
        """
        Hopf point selected by ``point`` or by ``(mu, tau)``.

        A named point uses the K = 1.05 reference values. Without a delay the
        lowest Hopf delay at ``mu`` is taken.

        Raises:
            DomainError: if no Hopf point lies within 5% of the requested delay
        """
        cfg = self.config
        K, mu, tau = cfg.K, cfg.mu, cfg.tau
        if cfg.point is not None:
            mu, tau = REFERENCE_POINTS[cfg.point]
            if K != REFERENCE_K:
                logger.warning(
                    f"⚠️ Point {cfg.point} is defined at K={REFERENCE_K}; ignoring K={K}"
                )
            K = REFERENCE_K

        candidates = [hp for _, hp in hopf_points_at(K, mu, self.n_values, self.branch)]
        if not candidates:
            raise DomainError(f"No Hopf point at K={K}, mu={mu} on the {self.branch} branch")
        if tau is None:
            return min(candidates, key=lambda hp: hp.tau)

        hp = min(candidates, key=lambda p: abs(p.tau - tau))
        if abs(hp.tau - tau) > PERIOD_TOL * tau:
            raise DomainError(
                f"No Hopf point near tau={tau} at mu={mu}; closest is tau={hp.tau:.6f}"
            )
        logger.info(f"✓ Hopf point mu={hp.mu}, tau={hp.tau:.6f}, omega={hp.omega:.6f}")
        return hp

    def _offsets(self, tau: float, transversality: int = 1) -> list[float]:
        """One pre-bifurcation offset and three post-bifurcation ones unless configured."""
        offsets = self.config.offsets
        if offsets is None:
            step = transversality * DEFAULT_RELATIVE_OFFSET * tau
            offsets = (-step, step, 2 * step, 3 * step)
        return sorted({0.0, *offsets})

    def verify(self) -> dict[str, Any]:
        """
        Compare the sign of the Lyapunov coefficient with a simulated side scan.

        Returns:
            JSON-ready report whose ``consistent`` field is true when the analytic
            and empirical criticality agree

        Raises:
            DegeneracyError: if the Hopf point fails its assumptions
        """
        cfg = self.config
        hp = self.locate_point()
        lin = hp.linearization()
        report = check_assumptions(hp, lin)
        if not report.all_hold:
            raise DegeneracyError(
                f"Assumptions fail at mu={hp.mu}, tau={hp.tau}: simple={report.simple}, "
                f"nonresonant={report.nonresonant}, transversal={report.transversal}"
            )

        nf = lyapunov_a(hp, lin, nonlinear_coeffs(hp.params(), hp.equilibrium()))
        analytic = int(np.sign(nf.a))

        delays = cfg.t_end / hp.tau if cfg.t_end else SCAN_DELAYS
        scan = hopf_side_scan(
            hp,
            hp.params(cfg.N or 2),
            self._offsets(hp.tau, hp.transversality),
            amp=cfg.scan_amplitude,
            steps=cfg.steps_per_delay,
            delays=delays,
            settle_fraction=cfg.settle_fraction,
            workers=cfg.workers,
        )
        empirical = empirical_criticality(scan, hp.transversality)
        critical = next(e.orbit for e in scan if e.offset == 0)

        expected = 2 * np.pi / hp.omega
        measured = critical.period_estimate
        error = None if measured is None else abs(measured - expected) / expected
        law = amplitude_law(scan, hp.transversality)
        consistent = analytic != 0 and analytic == empirical

        logger.info(f"✓ a={nf.a:.6e}, empirical sign {empirical:+d}, consistent={consistent}")
        return {
            "point": cfg.point,
            "hopf_point": {
                "K": hp.K,
                "mu": hp.mu,
                "tau": hp.tau,
                "omega": hp.omega,
                "n": hp.n_branch,
                "branch": str(hp.branch),
                "transversality": hp.transversality,
            },
            "assumptions": {
                "simple": report.simple,
                "nonresonant": report.nonresonant,
                "transversal": report.transversal,
                "crossing_speed": report.crossing_speed,
            },
            "a": nf.a,
            "sign_a": analytic,
            "empirical_sign": empirical,
            "lyapunov_estimate": critical.lyapunov_estimate,
            "side_scan": [{"offset": e.offset, **e.orbit.to_dict()} for e in scan],
            "amplitude_law": None if law is None else {"slope": law[0], "r2": law[1]},
            "period": {
                "measured": measured,
                "expected": expected,
                "relative_error": error,
                "within_tolerance": error is not None and error <= PERIOD_TOL,
            },
            "consistent": consistent,
        }

    def simulate(self) -> Trajectory:
        """
        Integrate the subspace model, or the N-node network when ``N`` is set.

        Raises:
            DomainError: on a bad step or delay
            DivergenceError: with the partial trajectory attached
        """
        cfg = self.config
        K, mu = cfg.K, cfg.mu
        if cfg.point is not None:
            K, mu = REFERENCE_K, REFERENCE_POINTS[cfg.point][0]
        tau = cfg.tau if cfg.tau is not None else self.locate_point().tau
        eq = equilibrium(K, self.branch, 0)
        dt = cfg.dt if cfg.dt is not None else tau / cfg.steps_per_delay
        t_end = cfg.t_end if cfg.t_end is not None else DEFAULT_DELAYS * tau

        if cfg.N is None:
            params = ModelParams(K=K, mu=mu, tau=tau)
            history = HistoryFunction.perturbed_equilibrium(eq, tau, cfg.eps)
            return integrate_subspace(params, eq, history, t_end=t_end, dt=dt)

        params = ModelParams(K=K, mu=mu, tau=tau, N=cfg.N)
        if cfg.identical_history:
            scales = [1.0] * cfg.N
        else:
            scales = [(i + 1) / cfg.N for i in range(cfg.N)]
        histories = [HistoryFunction.perturbed_equilibrium(eq, tau, cfg.eps * s) for s in scales]
        return integrate_network(params, histories, t_end=t_end, dt=dt)

    @staticmethod
    def equilibrium_rows(eqs: list[Equilibrium]) -> list[EquilibriumRow]:
        return [
            EquilibriumRow(
                branch=str(e.branch), n=e.n, phi=e.phi, sin2phi=e.sin2phi, cos2phi=e.cos2phi
            )
            for e in eqs
        ]

    @staticmethod
    def hopf_rows(curves: list[HopfCurve]) -> list[HopfRow]:
        """One row per Hopf point, ordered by mu then n."""
        points = sorted(
            (hp for curve in curves for hp in curve.points),
            key=lambda hp: (hp.mu, hp.n_branch, hp.tau),
        )
        return [
            HopfRow(
                mu=hp.mu,
                tau=hp.tau,
                omega=hp.omega,
                n=hp.n_branch,
                transversality_sign=hp.transversality,
            )
            for hp in points
        ]

    @staticmethod
    def lyapunov_rows(lmap: LyapunovMap) -> list[LyapunovRow]:
        return [
            LyapunovRow(
                mu=p.mu, tau=p.tau, omega=p.omega, a=p.a, transversality_sign=p.transversality
            )
            for p in lmap.points
        ]
