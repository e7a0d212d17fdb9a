"""Method-of-steps integration of the PLL delay equations and orbit classification.

The step ``dt`` divides ``τ`` exactly (``dt = τ/m``), so every delayed lookup of a
classical RK4 stage falls on a grid node or on the midpoint of an already
completed step. Midpoints are filled with the cubic Hermite interpolant built
from the node values and node derivatives of that step.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from multiprocessing import Pool
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

from .exceptions import DivergenceError, DomainError
from .model import Equilibrium, ModelParams, equilibrium, full_rhs, subspace_rhs
from .spectrum import HopfPoint

logger = logging.getLogger(__name__)

MIN_STEPS_PER_DELAY = 20
DEFAULT_STEPS_PER_DELAY = 40
DEFAULT_DELAYS = 200
SCAN_DELAYS = 1500
DEFAULT_EPS = 1e-2
SCAN_AMPLITUDE = 5e-2
DIVERGENCE_NORM = 1e6
ESCAPE_RADIUS = np.pi / 2
AMPLITUDE_FLOOR = 1e-10
MIN_PERIODS = 5
CONVERGE_SPREAD = 0.01
TREND_PERIODS = 10
TREND_TOL = 1e-3
MAX_RELATIVE_OFFSET = 0.05

Rhs = Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]


class HistoryKind(StrEnum):
    CONSTANT = "constant"
    EQUILIBRIUM_PERTURBATION = "equilibrium-plus-perturbation"
    SAMPLED = "sampled"


class Verdict(StrEnum):
    DECAYS = "decays-to-equilibrium"
    CONVERGES = "converges-to-periodic"
    GROWS = "grows"
    UNDECIDED = "undecided"


@dataclass(frozen=True, eq=False)
class HistoryFunction:
    """Initial data on [−τ, 0] for one node, state = (phase, rate)."""

    kind: HistoryKind
    tau: float
    times: NDArray[np.float64]
    values: NDArray[np.float64]
    spline: CubicSpline | None = None

    @classmethod
    def constant(cls, state: ArrayLike, tau: float) -> HistoryFunction:
        value = np.atleast_1d(np.asarray(state, dtype=float))
        return cls(HistoryKind.CONSTANT, tau, np.array([-tau, 0.0]), np.vstack([value, value]))

    @classmethod
    def perturbed_equilibrium(
        cls, eq: Equilibrium, tau: float, eps: float = DEFAULT_EPS
    ) -> HistoryFunction:
        """Constant history ``(φ_eq + eps, 0)``."""
        value = np.array([eq.phi + eps, 0.0])
        times = np.array([-tau, 0.0])
        return cls(HistoryKind.EQUILIBRIUM_PERTURBATION, tau, times, np.vstack([value, value]))

    @classmethod
    def sampled(cls, times: ArrayLike, values: ArrayLike) -> HistoryFunction:
        """Cubic-spline history through samples covering [−τ, 0]."""
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or len(t) < 2 or len(t) != len(v) or np.any(np.diff(t) <= 0):
            raise DomainError("Sampled history needs strictly increasing times matching the values")
        if not np.isclose(t[-1], 0.0):
            raise DomainError(f"Sampled history must end at t = 0, got {t[-1]}")
        return cls(HistoryKind.SAMPLED, float(-t[0]), t, v, CubicSpline(t, v, axis=0))

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def _check(self, t: float) -> None:
        slack = 1e-12 * max(1.0, self.tau)
        if t < -self.tau - slack or t > slack:
            raise DomainError(f"History evaluated at t={t}, outside [-{self.tau}, 0]")

    def __call__(self, t: float) -> NDArray[np.float64]:
        self._check(t)
        if self.spline is None:
            return self.values[0].copy()
        return np.asarray(self.spline(t), dtype=float)

    def derivative(self, t: float) -> NDArray[np.float64]:
        self._check(t)
        if self.spline is None:
            return np.zeros(self.dim)
        return np.asarray(self.spline(t, 1), dtype=float)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution on the grid ``t_k = k·dt`` with node derivatives for dense output."""

    times: NDArray[np.float64]
    states: NDArray[np.float64]
    slopes: NDArray[np.float64]
    tau: float
    dt: float
    labels: tuple[str, ...]
    diverged: bool = False

    @property
    def nodes(self) -> int:
        return len(self.labels) // 2 if self.is_network else 1

    @property
    def is_network(self) -> bool:
        return self.labels[0].startswith("phi_")

    @property
    def sync_deviation(self) -> NDArray[np.float64]:
        """Largest phase difference between any node and node 1 at each time."""
        if not self.is_network:
            return np.zeros(len(self.times))
        phases = self.states[:, : self.nodes]
        return np.max(np.abs(phases - phases[:, :1]), axis=1)

    def dense(self, t: ArrayLike) -> NDArray[np.float64]:
        """Cubic Hermite interpolant of the state; exact at grid nodes."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise DomainError("Dense output requested outside the integrated interval")

        k = np.clip(np.floor((t - self.times[0]) / self.dt).astype(int), 0, len(self.times) - 2)
        h = self.times[k + 1] - self.times[k]
        s = ((t - self.times[k]) / h)[:, None]
        y0, y1 = self.states[k], self.states[k + 1]
        m0, m1 = self.slopes[k] * h[:, None], self.slopes[k + 1] * h[:, None]
        return (
            (2 * s**3 - 3 * s**2 + 1) * y0
            + (s**3 - 2 * s**2 + s) * m0
            + (-2 * s**3 + 3 * s**2) * y1
            + (s**3 - s**2) * m1
        )

    def header(self) -> list[str]:
        cols = ["t", *self.labels]
        return [*cols, "sync_deviation"] if self.is_network else cols

    def to_rows(self) -> list[list[float]]:
        rows = np.column_stack([self.times, self.states])
        if self.is_network:
            rows = np.column_stack([rows, self.sync_deviation])
        return rows.tolist()


class OrbitClass(NamedTuple):
    """Verdict on the long-time behaviour of a trajectory near an equilibrium."""

    verdict: Verdict
    amplitude_series: tuple[float, ...]
    period_estimate: float | None
    drift_slope: float | None = None
    escaped: bool = False

    @property
    def lyapunov_estimate(self) -> float | None:
        """ṙ = a r³ makes 1/r² linear in t with slope −2a."""
        return None if self.drift_slope is None else -0.5 * self.drift_slope

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": str(self.verdict),
            "amplitude_series": list(self.amplitude_series),
            "period_estimate": self.period_estimate,
            "drift_slope": self.drift_slope,
            "lyapunov_estimate": self.lyapunov_estimate,
            "escaped": self.escaped,
        }


class SideScanEntry(NamedTuple):
    offset: float
    orbit: OrbitClass


def steps_per_delay(tau: float, dt: float) -> int:
    """Integer ``m`` with ``dt = τ/m``.

    Raises:
        DomainError: if dt does not divide τ or gives fewer than 20 steps per delay
    """
    if tau <= 0:
        raise DomainError(f"The method of steps needs tau > 0, got {tau}")
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    m = round(tau / dt)
    if m < 1 or abs(m * dt - tau) > 1e-9 * tau:
        raise DomainError(f"dt={dt} does not divide tau={tau}; use dt = tau/m for an integer m")
    if m < MIN_STEPS_PER_DELAY:
        raise DomainError(f"dt={dt} gives {m} steps per delay, need at least {MIN_STEPS_PER_DELAY}")
    return int(m)


def _method_of_steps(
    rhs: Rhs,
    history: Callable[[float], NDArray[np.float64]],
    history_slope: Callable[[float], NDArray[np.float64]],
    tau: float,
    dt: float,
    t_end: float,
    labels: tuple[str, ...],
) -> Trajectory:
    m = steps_per_delay(tau, dt)
    dt = tau / m
    n_steps = int(np.ceil(t_end / dt - 1e-9))
    dim = len(labels)

    ys = np.empty((m + n_steps + 1, dim))
    left = np.empty_like(ys)
    right = np.empty_like(ys)
    for k in range(m + 1):
        t = -tau * (m - k) / m
        ys[k] = history(t)
        left[k] = right[k] = history_slope(t)
    right[m] = rhs(ys[m], ys[0])

    def trajectory(last: int, diverged: bool = False) -> Trajectory:
        count = last - m + 1
        return Trajectory(
            times=dt * np.arange(count),
            states=ys[m : last + 1].copy(),
            slopes=right[m : last + 1].copy(),
            tau=tau,
            dt=dt,
            labels=labels,
            diverged=diverged,
        )

    half = 0.5 * dt
    for step in range(n_steps):
        i, j = m + step, step
        y = ys[i]
        mid = 0.5 * (ys[j] + ys[j + 1]) + dt / 8.0 * (right[j] - left[j + 1])

        k1 = right[i]
        k2 = rhs(y + half * k1, mid)
        k3 = rhs(y + half * k2, mid)
        k4 = rhs(y + dt * k3, ys[j + 1])
        y_new = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        if not np.all(np.isfinite(y_new)) or np.linalg.norm(y_new) > DIVERGENCE_NORM:
            partial = trajectory(i, diverged=True)
            raise DivergenceError(
                f"State norm exceeded {DIVERGENCE_NORM:g} at t={(step + 1) * dt:.6g}", partial
            )

        ys[i + 1] = y_new
        left[i + 1] = right[i + 1] = rhs(y_new, ys[j + 1])

    return trajectory(m + n_steps)


def _resolve_grid(tau: float, t_end: float | None, dt: float | None) -> tuple[float, float]:
    dt = tau / DEFAULT_STEPS_PER_DELAY if dt is None else dt
    t_end = DEFAULT_DELAYS * tau if t_end is None else t_end
    if t_end <= 10 * tau:
        raise DomainError(f"t_end must exceed 10*tau = {10 * tau}, got {t_end}")
    return t_end, dt


def integrate_subspace(
    params: ModelParams,
    eq: Equilibrium,
    history: HistoryFunction | None = None,
    t_end: float | None = None,
    dt: float | None = None,
) -> Trajectory:
    """
    Integrate the synchronized (non-truncated) dynamics in absolute phase.

    Args:
        params: model parameters; ``params.tau`` is the delay
        eq: equilibrium the default history perturbs
        history: initial data, defaults to ``(φ_eq + 1e-2, 0)``
        t_end: final time, defaults to 200τ
        dt: step, must equal τ/m with m >= 20; defaults to τ/40

    Raises:
        DomainError: on a bad step or history
        DivergenceError: if the state norm exceeds 1e6
    """
    tau = params.tau
    t_end, dt = _resolve_grid(tau, t_end, dt)
    history = history or HistoryFunction.perturbed_equilibrium(eq, tau)
    if history.dim != 2:
        raise DomainError(f"Subspace history must be 2-dimensional, got {history.dim}")

    def rhs(y: NDArray, yd: NDArray) -> NDArray:
        return subspace_rhs(y, yd[0], params)

    traj = _method_of_steps(rhs, history, history.derivative, tau, dt, t_end, ("x1", "x2"))
    logger.debug(f"✓ Integrated subspace model to t={traj.times[-1]:.6g} ({len(traj.times)} nodes)")
    return traj


def integrate_network(
    params: ModelParams,
    histories: Sequence[HistoryFunction],
    t_end: float | None = None,
    dt: float | None = None,
) -> Trajectory:
    """
    Integrate the full 2N-dimensional network; state = (φ_1..φ_N, φ̇_1..φ̇_N).

    Raises:
        DomainError: if the number or shape of histories does not match ``params.N``
        DivergenceError: if the state norm exceeds 1e6
    """
    N, tau = params.N, params.tau
    if len(histories) != N:
        raise DomainError(f"Expected {N} node histories, got {len(histories)}")
    if any(h.dim != 2 for h in histories):
        raise DomainError("Every node history must be 2-dimensional (phase, rate)")
    t_end, dt = _resolve_grid(tau, t_end, dt)

    def stacked(t: float) -> NDArray:
        values = np.array([h(t) for h in histories])
        return np.concatenate([values[:, 0], values[:, 1]])

    def stacked_slope(t: float) -> NDArray:
        values = np.array([h.derivative(t) for h in histories])
        return np.concatenate([values[:, 0], values[:, 1]])

    def rhs(y: NDArray, yd: NDArray) -> NDArray:
        return full_rhs(y, yd[:N], params)

    labels = tuple(f"phi_{i + 1}" for i in range(N)) + tuple(f"dphi_{i + 1}" for i in range(N))
    traj = _method_of_steps(rhs, stacked, stacked_slope, tau, dt, t_end, labels)
    logger.debug(f"✓ Integrated {N}-node network to t={traj.times[-1]:.6g}")
    return traj


def _refined_extreme(x: NDArray, k: int) -> float:
    """Parabolic refinement of a discrete extremum at index ``k``."""
    if 0 < k < len(x) - 1:
        curvature = x[k + 1] - 2 * x[k] + x[k - 1]
        if curvature != 0:
            return float(x[k] - (x[k + 1] - x[k - 1]) ** 2 / (8 * curvature))
    return float(x[k])


def _per_period(t: NDArray, x: NDArray) -> tuple[list[float], list[float], list[float]]:
    """Amplitudes, periods and period midpoints between consecutive upward zero crossings."""
    idx = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    crossings = t[idx] - x[idx] * (t[idx + 1] - t[idx]) / (x[idx + 1] - x[idx])

    amplitudes, periods, mids = [], [], []
    for a, b, ta, tb in zip(idx, idx[1:], crossings, crossings[1:], strict=False):
        seg = x[a : b + 2]
        top = _refined_extreme(seg, int(np.argmax(seg)))
        bottom = _refined_extreme(seg, int(np.argmin(seg)))
        amplitudes.append(0.5 * (top - bottom))
        periods.append(float(tb - ta))
        mids.append(float(0.5 * (ta + tb)))
    return amplitudes, periods, mids


def _verdict(amplitudes: Sequence[float]) -> Verdict:
    """Judge the tail by its log-amplitude slope per period, then by its spread."""
    tail = np.asarray(amplitudes)[-TREND_PERIODS:]
    slope = np.polyfit(np.arange(len(tail)), np.log(tail), 1)[0]
    if slope < -TREND_TOL:
        return Verdict.DECAYS
    if slope > TREND_TOL:
        return Verdict.GROWS
    if tail.max() - tail.min() <= CONVERGE_SPREAD * tail.mean():
        return Verdict.CONVERGES
    return Verdict.UNDECIDED


def critical_drift(times: Sequence[float], amplitudes: Sequence[float]) -> float | None:
    """
    Slope of 1/r² against time over per-period amplitudes.

    Near the Hopf point ṙ = a r³, so the slope is −2a; None with fewer than five periods.
    """
    if len(amplitudes) < MIN_PERIODS or min(amplitudes) <= 0:
        return None
    return float(np.polyfit(np.asarray(times), 1.0 / np.square(amplitudes), 1)[0])


def classify_orbit(
    traj: Trajectory,
    eq: Equilibrium,
    settle_fraction: float = 0.5,
    escape_radius: float = ESCAPE_RADIUS,
) -> OrbitClass:
    """
    Classify the phase of node 1 relative to ``eq``.

    A trajectory that diverged or moved more than ``escape_radius`` away from the
    equilibrium grows; its amplitudes are read up to the escape. Otherwise the
    first ``settle_fraction`` is discarded and per-period amplitudes decide.
    """
    x = traj.states[:, 0] - eq.phi
    t = traj.times

    outside = np.flatnonzero(np.abs(x) > escape_radius)
    escaped = traj.diverged or outside.size > 0
    if escaped:
        stop = int(outside[0]) if outside.size else len(x)
        seg_t, seg_x = t[:stop], x[:stop]
    else:
        start = int(settle_fraction * len(x))
        seg_t, seg_x = t[start:], x[start:]

    amplitudes, periods, mids = _per_period(seg_t, seg_x)
    drift = critical_drift(mids, amplitudes)
    period = float(np.mean(periods)) if periods else None

    if escaped:
        verdict = Verdict.GROWS
    elif seg_x.size == 0 or np.max(np.abs(seg_x)) <= AMPLITUDE_FLOOR:
        verdict = Verdict.DECAYS
    elif len(amplitudes) < MIN_PERIODS:
        verdict = Verdict.UNDECIDED
    else:
        verdict = _verdict(amplitudes)

    return OrbitClass(verdict, tuple(amplitudes), period, drift, bool(escaped))


def _scan_offset(
    offset: float,
    hp: HopfPoint,
    base: ModelParams,
    amp: float,
    steps: int,
    delays: float,
    settle_fraction: float,
) -> SideScanEntry:
    tau = hp.tau + offset
    params = ModelParams(K=base.K, mu=base.mu, tau=tau, N=base.N)
    eq = equilibrium(base.K, hp.branch, 0)
    history = HistoryFunction.perturbed_equilibrium(eq, tau, amp)
    try:
        traj = integrate_subspace(params, eq, history, t_end=delays * tau, dt=tau / steps)
    except DivergenceError as e:
        logger.info(f"Offset {offset:+.4g} diverged: {e}")
        if e.trajectory is None:  # pragma: no cover
            return SideScanEntry(offset, OrbitClass(Verdict.GROWS, (), None, None, True))
        traj = e.trajectory
    orbit = classify_orbit(traj, eq, settle_fraction)
    logger.info(f"✓ Offset {offset:+.4g}: {orbit.verdict} (period {orbit.period_estimate})")
    return SideScanEntry(offset, orbit)


def hopf_side_scan(
    hp: HopfPoint,
    params_base: ModelParams,
    offsets: Sequence[float],
    amp: float = SCAN_AMPLITUDE,
    steps: int = DEFAULT_STEPS_PER_DELAY,
    delays: float = SCAN_DELAYS,
    settle_fraction: float = 0.5,
    workers: int = 1,
) -> list[SideScanEntry]:
    """
    Simulate and classify at τ = hp.tau + δτ for each offset.

    Entries come back in the order of ``offsets`` whatever ``workers`` is.

    Raises:
        DomainError: if an offset exceeds 5% of τ
    """
    for offset in offsets:
        if abs(offset) > MAX_RELATIVE_OFFSET * hp.tau:
            raise DomainError(f"Offset {offset} exceeds 5% of tau={hp.tau}")

    jobs = [(float(o), hp, params_base, amp, steps, delays, settle_fraction) for o in offsets]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            return pool.starmap(_scan_offset, jobs)
    return [_scan_offset(*job) for job in jobs]


def empirical_criticality(scan: Sequence[SideScanEntry], transversality: int) -> int:
    """
    +1 for a subcritical signature, −1 for supercritical, 0 when undecided.

    The δτ = 0 run decides through the drift of 1/r²; otherwise the verdicts on
    the two sides of the Hopf point are compared.
    """
    critical = next((e.orbit for e in scan if e.offset == 0), None)
    if critical is not None:
        if critical.verdict is Verdict.GROWS:
            return 1
        if critical.drift_slope:
            return -int(np.sign(critical.drift_slope))

    stable_side = [e.orbit for e in scan if np.sign(e.offset) == -transversality]
    unstable_side = [e.orbit for e in scan if np.sign(e.offset) == transversality]
    if any(o.verdict is Verdict.GROWS for o in stable_side):
        return 1
    if any(o.verdict is Verdict.CONVERGES for o in unstable_side) and not any(
        o.verdict is Verdict.GROWS for o in unstable_side
    ):
        return -1
    return 0


def amplitude_law(
    scan: Sequence[SideScanEntry], transversality: int
) -> tuple[float, float] | None:
    """Slope and R² of amplitude² against δτ over the converged post-bifurcation runs."""
    pts = [
        (e.offset, e.orbit.amplitude_series[-1] ** 2)
        for e in scan
        if np.sign(e.offset) == transversality
        and e.orbit.verdict is Verdict.CONVERGES
        and e.orbit.amplitude_series
    ]
    if len(pts) < 2:
        return None

    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if total == 0 else float(1 - np.sum(resid**2) / total)
    return float(slope), r2
