"""Characteristic equation of the subspace linearization and Hopf-curve tracing.

The characteristic function is Δ(λ) = λ² + μλ − α − β e^(−λτ). A purely imaginary
root λ = iω needs |−ω² − α|² + (μω)² = β², i.e. the biquadratic

    ω⁴ + (2α + μ²) ω² + (α² − β²) = 0,

and then τ follows from cos ωτ = −(ω² + α)/β, sin ωτ = −μω/β.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .exceptions import DegeneracyError, DomainError
from .model import (
    Branch,
    Equilibrium,
    ModelParams,
    SubspaceLinearization,
    equilibrium,
    linearize,
)
from .utils import sweep_values

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
RESONANCE_TOL = 1e-6
POLISH_TOL = 1e-8
DOUBLE_ROOT_TOL = 1e-12
SIMPLICITY_TOL = 1e-10
TRANSVERSALITY_TOL = 1e-14


@dataclass(frozen=True)
class HopfPoint:
    """A parameter locus where the simple pair ±iω sits on the imaginary axis."""

    mu: float
    tau: float
    omega: float
    n_branch: int
    transversality: int
    K: float
    branch: Branch = Branch.MINUS
    crossing_speed: float = float("nan")

    def params(self, N: int = 2) -> ModelParams:
        return ModelParams(K=self.K, mu=self.mu, tau=self.tau, N=N)

    def equilibrium(self) -> Equilibrium:
        return equilibrium(self.K, self.branch, 0)

    def linearization(self) -> SubspaceLinearization:
        return linearize(self.params(), self.equilibrium())


@dataclass(frozen=True)
class HopfCurve:
    """Hopf points of one delay branch and one frequency root, ordered by μ."""

    points: tuple[HopfPoint, ...]
    branch: Branch
    n_branch: int
    root_index: int = 0

    @property
    def transversality(self) -> int:
        return self.points[0].transversality if self.points else 0

    @property
    def mu_values(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    @property
    def tau_values(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the simplicity, non-resonance and transversality checks."""

    simple: bool
    nonresonant: bool
    transversal: bool
    derivative_modulus: float = 0.0
    crossing_speed: float = 0.0
    resonance_residuals: dict[int, float] = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.simple and self.nonresonant and self.transversal


def char_residual(lam: complex, lin: SubspaceLinearization, tau: float) -> complex:
    """Δ(λ) = λ² + μλ − α − β e^(−λτ)."""
    return complex(lam**2 + lin.mu * lam - lin.alpha - lin.beta * np.exp(-lam * tau))


def characteristic_derivative(lam: complex, lin: SubspaceLinearization, tau: float) -> complex:
    """dΔ/dλ = 2λ + μ + τβ e^(−λτ)."""
    return complex(2 * lam + lin.mu + tau * lin.beta * np.exp(-lam * tau))


def omega_candidates(mu: float, lin: SubspaceLinearization) -> list[float]:
    """
    Positive crossing frequencies, largest first.

    A (numerically) double root of the biquadratic violates simplicity; it is
    logged and skipped.
    """
    if mu < 0:
        raise DomainError(f"mu must be >= 0, got {mu}")

    b = 2 * lin.alpha + mu**2
    c = lin.alpha**2 - lin.beta**2
    disc = b**2 - 4 * c
    if disc < 0:
        return []

    scale = max(b**2, abs(c), np.finfo(float).tiny)
    if disc <= DOUBLE_ROOT_TOL * scale and b < 0:
        logger.warning(
            f"⚠️ Double crossing frequency at mu={mu} "
            f"(biquadratic discriminant {disc:.3e}); skipped"
        )
        return []

    sq = np.sqrt(disc)
    head = -0.5 * (b + np.copysign(sq, b))
    roots = [head, c / head] if head != 0 else [0.0]
    return sorted((float(np.sqrt(z)) for z in roots if z > 0), reverse=True)


def tau_branches(
    omega: float, mu: float, lin: SubspaceLinearization, n_range: Iterable[int]
) -> list[tuple[float, int]]:
    """
    Delays τ_n = (θ + 2πn)/ω with θ ∈ [0, 2π) solving the crossing condition.

    Raises:
        DegeneracyError: if β = 0 (no delayed coupling)
    """
    if lin.beta == 0:
        raise DegeneracyError(
            "beta = 0: the delayed term vanishes and no delay-induced Hopf exists"
        )

    cos_wt = -(omega**2 + lin.alpha) / lin.beta
    sin_wt = -mu * omega / lin.beta
    theta = float(np.mod(np.arctan2(sin_wt, cos_wt), 2 * np.pi))

    branches = []
    for n in sorted(n_range):
        tau = (theta + 2 * np.pi * n) / omega
        if tau >= 0:
            branches.append((float(tau), int(n)))
    return branches


def root_velocity(omega: float, tau: float, lin: SubspaceLinearization) -> complex:
    """dλ/dτ at λ = iω from implicit differentiation of Δ(λ, τ) = 0."""
    lam = 1j * omega
    denom = characteristic_derivative(lam, lin, tau)
    if abs(denom) < SIMPLICITY_TOL:
        raise DegeneracyError(
            f"dΔ/dλ vanishes at iω (omega={omega}, tau={tau}); the crossing is not simple"
        )
    return -lam * lin.beta * np.exp(-lam * tau) / denom


def transversality(hp: HopfPoint, lin: SubspaceLinearization) -> float:
    """Re(dλ/dτ) at the Hopf point; its sign tells the curve family."""
    return float(root_velocity(hp.omega, hp.tau, lin).real)


def polish_root(omega: float, tau: float, lin: SubspaceLinearization) -> complex:
    """One complex Newton step on Δ from iω; it must not move the root by more than 1e-8."""
    lam = 1j * omega
    step = char_residual(lam, lin, tau) / characteristic_derivative(lam, lin, tau)
    if abs(step) > POLISH_TOL:
        raise DegeneracyError(
            f"Newton polish moved the root by {abs(step):.3e} at omega={omega}, tau={tau}"
        )
    return lam - step


def check_assumptions(hp: HopfPoint, lin: SubspaceLinearization) -> AssumptionReport:
    """Evaluate simplicity, non-resonance (k = 0, 2, 3) and transversality at ``hp``."""
    lam = 1j * hp.omega
    modulus = abs(characteristic_derivative(lam, lin, hp.tau))
    simple = modulus > SIMPLICITY_TOL

    residuals = {k: abs(char_residual(1j * k * hp.omega, lin, hp.tau)) for k in (0, 2, 3)}
    nonresonant = all(r > RESONANCE_TOL for r in residuals.values())

    speed = transversality(hp, lin) if simple else 0.0
    return AssumptionReport(
        simple=simple,
        nonresonant=nonresonant,
        transversal=abs(speed) > TRANSVERSALITY_TOL,
        derivative_modulus=modulus,
        crossing_speed=speed,
        resonance_residuals=residuals,
    )


def hopf_points_at(
    K: float, mu: float, n_values: Iterable[int], branch: Branch | str = Branch.MINUS
) -> list[tuple[int, HopfPoint]]:
    """All Hopf points at one μ, tagged with the frequency-root index (0 = largest ω)."""
    branch = Branch(branch)
    params = ModelParams(K=K, mu=mu)
    lin = linearize(params, equilibrium(K, branch, 0))
    n_values = list(n_values)

    found = []
    for rank, omega in enumerate(omega_candidates(mu, lin)):
        for tau, n in tau_branches(omega, mu, lin, n_values):
            try:
                polish_root(omega, tau, lin)
                speed = root_velocity(omega, tau, lin).real
            except DegeneracyError as e:
                logger.warning(f"⚠️ Skipping (mu={mu}, n={n}): {e}")
                continue

            residual = abs(char_residual(1j * omega, lin, tau))
            if residual >= RESIDUAL_TOL:
                logger.warning(f"⚠️ Skipping (mu={mu}, n={n}): residual {residual:.3e}")
                continue
            if abs(speed) <= TRANSVERSALITY_TOL:
                logger.warning(f"⚠️ Skipping (mu={mu}, n={n}): zero crossing speed")
                continue

            hp = HopfPoint(
                mu=float(mu),
                tau=tau,
                omega=omega,
                n_branch=n,
                transversality=int(np.sign(speed)),
                K=K,
                branch=branch,
                crossing_speed=float(speed),
            )
            found.append((rank, hp))
    return found


def hopf_curves(
    K: float,
    mu_range: tuple[float, float, float],
    n_range: Iterable[int],
    branch: Branch | str = Branch.MINUS,
    workers: int = 1,
) -> list[HopfCurve]:
    """
    Trace Hopf curves by sweeping μ and solving the crossing condition in closed form.

    Args:
        K: coupling gain, K > 1
        mu_range: ``(start, step, stop)``, stop inclusive
        n_range: delay branch indices
        branch: equilibrium branch
        workers: processes used for the sweep

    Returns:
        Curves keyed by (n, frequency root) and split wherever a point is missing,
        ordered by n, root index and first μ.

    Raises:
        DomainError: if K <= 1 (degenerate codimension-two case)
    """
    if not K > 1:
        raise DomainError(
            f"Hopf curves need K > 1; K={K} is the degenerate codimension-two case"
        )

    branch = Branch(branch)
    start, step, stop = mu_range
    mus = sweep_values(start, step, stop)
    n_values = list(n_range)

    jobs = [(K, float(mu), n_values, branch) for mu in mus]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            per_mu = pool.starmap(hopf_points_at, jobs)
    else:
        per_mu = [hopf_points_at(*job) for job in jobs]

    finished: list[HopfCurve] = []
    open_curves: dict[tuple[int, int], tuple[int, list[HopfPoint]]] = {}

    def close(key: tuple[int, int]) -> None:
        _, pts = open_curves.pop(key)
        finished.append(HopfCurve(tuple(pts), branch, key[0], key[1]))

    for index, points in enumerate(per_mu):
        for rank, hp in points:
            key = (hp.n_branch, rank)
            if key in open_curves:
                last_index, pts = open_curves[key]
                if last_index == index - 1 and pts[-1].transversality == hp.transversality:
                    pts.append(hp)
                    open_curves[key] = (index, pts)
                    continue
                close(key)
            open_curves[key] = (index, [hp])

    for key in list(open_curves):
        close(key)

    finished.sort(key=lambda c: (c.n_branch, c.root_index, c.points[0].mu))
    logger.info(f"✓ Traced {len(finished)} Hopf curves over {len(mus)} values of mu")
    return finished
