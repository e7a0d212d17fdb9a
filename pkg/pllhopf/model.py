"""Full-phase PLL network model, its equilibria and the fixed-point-subspace reduction.

The network of ``N`` identical second-order loops reads

    φ̈_i + μ φ̇_i − μ − (Kμ / (N−1)) Σ_{j≠i} [sin(φ_j(t−τ) − φ_i) + sin(φ_j(t−τ) + φ_i)] = 0.

On the synchronization subspace all nodes coincide and the coupling sum collapses
to a single term. Shifting φ = φ_eq + x removes the constant forcing ``μ``
(it cancels against ``Kμ sin 2φ_eq = −μ``), so the truncated model used by the
center-manifold reduction has no constant term while the simulator keeps it.
Phases are never wrapped modulo 2π.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import DomainError

logger = logging.getLogger(__name__)


class Branch(StrEnum):
    """Equilibrium family φ⁺ / φ⁻."""

    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector η = (K, μ, τ) plus the node count."""

    K: float
    mu: float
    tau: float = 0.0
    N: int = 2

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise DomainError(f"K must be > 0, got {self.K}")
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if not self.tau >= 0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N}")

    def with_tau(self, tau: float) -> ModelParams:
        return replace(self, tau=tau)


@dataclass(frozen=True)
class Equilibrium:
    """Synchronized equilibrium φ = phi of all nodes, with cached trigonometric values."""

    phi: float
    branch: Branch
    n: int
    sin2phi: float
    cos2phi: float


@dataclass(frozen=True, eq=False)
class SubspaceLinearization:
    """Linearization ẋ = A0 x(t) + Atau x(t−τ) of the subspace model."""

    A0: NDArray[np.float64]
    Atau: NDArray[np.float64]
    alpha: float
    beta: float

    @property
    def mu(self) -> float:
        return float(-self.A0[1, 1])


@dataclass(frozen=True)
class NonlinearCoeffs:
    """Third-order Taylor coefficients of the second-component nonlinearity f₂."""

    q: float
    c_minus: float
    c_plus: float

    @classmethod
    def zero(cls) -> NonlinearCoeffs:
        return cls(0.0, 0.0, 0.0)


def equilibrium(K: float, branch: Branch | str = Branch.PLUS, n: int = 0) -> Equilibrium:
    """
    Synchronized equilibrium of the network.

    φ⁺(n) = ½(arcsin(−1/K) + 2nπ) and φ⁻(n) = ½(π − arcsin(−1/K) + 2nπ).

    Args:
        K: coupling gain, K >= 1
        branch: ``plus`` or ``minus``
        n: integer winding index

    Raises:
        DomainError: if K < 1 (arcsin argument out of range)
    """
    if not K >= 1:
        raise DomainError(f"Equilibria require K >= 1 so that arcsin(-1/K) is real, got K={K}")

    branch = Branch(branch)
    base = np.arcsin(-1.0 / K)
    cos_base = np.sqrt(max(0.0, 1.0 - 1.0 / K**2))

    if branch is Branch.PLUS:
        phi = 0.5 * (base + 2 * n * np.pi)
        cos2phi = cos_base
    else:
        phi = 0.5 * (np.pi - base + 2 * n * np.pi)
        cos2phi = -cos_base

    return Equilibrium(
        phi=float(phi), branch=branch, n=int(n), sin2phi=-1.0 / K, cos2phi=float(cos2phi)
    )


def equilibria_table(K: float, n_values: range | list[int]) -> list[Equilibrium]:
    """Both branches for each winding index, ordered by n then branch."""
    return [equilibrium(K, branch, n) for n in n_values for branch in (Branch.PLUS, Branch.MINUS)]


def linearize(params: ModelParams, eq: Equilibrium) -> SubspaceLinearization:
    """A0 = [[0, 1], [α, −μ]], Aτ = [[0, 0], [β, 0]].

    α = Kμ(c − 1) and β = Kμ(1 + c) with c = cos 2φ.
    """
    k_mu = params.K * params.mu
    alpha = k_mu * (-1.0 + eq.cos2phi)
    beta = k_mu * (1.0 + eq.cos2phi)
    A0 = np.array([[0.0, 1.0], [alpha, -params.mu]])
    Atau = np.array([[0.0, 0.0], [beta, 0.0]])
    return SubspaceLinearization(A0=A0, Atau=Atau, alpha=alpha, beta=beta)


def nonlinear_coeffs(params: ModelParams, eq: Equilibrium) -> NonlinearCoeffs:
    """Expand sin(x_τ − x) + sin(2φ + x_τ + x) to third order around the equilibrium."""
    k_mu = params.K * params.mu
    return NonlinearCoeffs(
        q=-0.5 * k_mu * eq.sin2phi,
        c_minus=-k_mu / 6.0,
        c_plus=-k_mu / 6.0 * eq.cos2phi,
    )


def f2_eval(x1_0: ArrayLike, x1_tau: ArrayLike, coeffs: NonlinearCoeffs) -> ArrayLike:
    """q(x_τ + x)² + c₋(x_τ − x)³ + c₊(x_τ + x)³, elementwise."""
    s = np.add(x1_tau, x1_0)
    d = np.subtract(x1_tau, x1_0)
    return coeffs.q * s**2 + coeffs.c_minus * d**3 + coeffs.c_plus * s**3


def coupling(phi_i: ArrayLike, phi_j_delayed: ArrayLike) -> ArrayLike:
    """Pairwise coupling f(φ_i, φ_j(t−τ)) = sin(φ_jτ − φ_i) + sin(φ_jτ + φ_i)."""
    return np.sin(np.subtract(phi_j_delayed, phi_i)) + np.sin(np.add(phi_j_delayed, phi_i))


def subspace_rhs(
    state: NDArray[np.float64], delayed_phase: float, params: ModelParams
) -> NDArray[np.float64]:
    """Non-truncated synchronized dynamics; ``state`` is (phase, rate)."""
    phase, rate = state[0], state[1]
    accel = -params.mu * rate + params.mu + params.K * params.mu * coupling(phase, delayed_phase)
    return np.array([rate, accel])


def full_rhs(
    state: NDArray[np.float64], delayed: NDArray[np.float64], params: ModelParams
) -> NDArray[np.float64]:
    """
    First-order form of the full network.

    Args:
        state: ``(φ_1..φ_N, φ̇_1..φ̇_N)``
        delayed: delayed phases ``φ_1(t−τ)..φ_N(t−τ)``
        params: model parameters, ``params.N`` nodes

    Raises:
        DomainError: on dimension mismatch
    """
    N = params.N
    state = np.asarray(state, dtype=float)
    delayed = np.asarray(delayed, dtype=float)
    if state.shape != (2 * N,) or delayed.shape != (N,):
        raise DomainError(
            f"Expected state of shape ({2 * N},) and delayed phases of shape ({N},), "
            f"got {state.shape} and {delayed.shape}"
        )

    phases, rates = state[:N], state[N:]
    pair = coupling(phases[:, None], delayed[None, :])
    total = pair.sum(axis=1) - np.diagonal(pair)
    accel = -params.mu * rates + params.mu + params.K * params.mu / (N - 1) * total
    return np.concatenate([rates, accel])
