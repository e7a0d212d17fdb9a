"""Center-manifold reduction at a Hopf point and the first Lyapunov coefficient.

Conventions
-----------
Eigenfunctions on [−τ, 0]::

    s₁(ϑ) = cos(ωϑ) c₁ − sin(ωϑ) c₂,   s₂(ϑ) = sin(ωϑ) c₁ + cos(ωϑ) c₂

satisfy Φ' = ΦB with B = [[0, ω], [−ω, 0]], so the reduced linear flow is
ẏ₁ = ω y₂, ẏ₂ = −ω y₁. Adjoint functions live on [0, τ] with the same
trigonometric form in d₁, d₂ and obey Ψ' = −BΨ together with the boundary
condition BΨ(0) = Ψ(0)A₀ + Ψ(τ)A_τ, the pairing used by the bilinear form

    ⟨n, s⟩ = n(0)ᵀ s(0) + ∫₋τ⁰ n(σ + τ)ᵀ A_τ s(σ) dσ.

The quadratic part of the manifold is w(ϑ) = ½(h₁ y₁² + 2h₂ y₁y₂ + h₃ y₂²) where
h = (h₁, h₂, h₃) solves h' = Ch + p cos ωϑ + q sin ωϑ. The forcing weights are the
second derivatives 2f²⁰, f¹¹, 2f⁰² of the reduced nonlinearity;
``published_weights=True`` keeps the literal weights f²⁰, f¹¹, f⁰² instead.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from .exceptions import DegeneracyError, PllHopfError
from .model import (
    Equilibrium,
    ModelParams,
    NonlinearCoeffs,
    SubspaceLinearization,
    nonlinear_coeffs,
)
from .spectrum import (
    HopfCurve,
    HopfPoint,
    char_residual,
    characteristic_derivative,
    check_assumptions,
)

logger = logging.getLogger(__name__)

QUADRATURE_NODES = 24
CHECK_QUADRATURE_NODES = 64
NULLSPACE_RTOL = 1e-8
ORTHONORMALITY_TOL = 1e-9
BOUNDARY_TOL = 1e-9
EXPM_CHECK_TOL = 1e-8
CONDITION_LIMIT = 1e12

_B3 = np.array([[0.0, -2.0, 0.0], [1.0, 0.0, -1.0], [0.0, 2.0, 0.0]])
_E2 = np.array([0.0, 1.0])

Pair = Callable[[ArrayLike], NDArray[np.float64]]


def _trig_pair(theta: ArrayLike, omega: float, u: NDArray, v: NDArray) -> NDArray[np.float64]:
    """Stack (cos u − sin v, sin u + cos v) at ωθ; shape (..., 2, 2), row j is function j."""
    th = np.asarray(theta, dtype=float)[..., None]
    cw, sw = np.cos(omega * th), np.sin(omega * th)
    return np.stack([cw * u - sw * v, sw * u + cw * v], axis=-2)


@dataclass(frozen=True, eq=False)
class Eigenfunctions:
    """Coefficient vectors of the center eigenfunctions s and adjoint functions n."""

    c1: NDArray[np.float64]
    c2: NDArray[np.float64]
    d1: NDArray[np.float64]
    d2: NDArray[np.float64]
    omega: float
    tau: float

    def s(self, theta: ArrayLike) -> NDArray[np.float64]:
        return _trig_pair(theta, self.omega, self.c1, self.c2)

    def n(self, theta: ArrayLike) -> NDArray[np.float64]:
        return _trig_pair(theta, self.omega, self.d1, self.d2)

    @property
    def panels(self) -> int:
        return _panels(self.omega, self.tau)


@dataclass(frozen=True, eq=False)
class CenterCoeffs:
    """Solution of the h-system: h(ϑ) = e^(Cϑ) Kvec + M cos ωϑ + N sin ωϑ."""

    M: NDArray[np.float64]
    N: NDArray[np.float64]
    Kvec: NDArray[np.float64]
    f20: float
    f11: float
    f02: float
    h0: NDArray[np.float64]
    htau: NDArray[np.float64]
    C: NDArray[np.float64]
    omega: float

    def h(self, theta: float) -> NDArray[np.float64]:
        w = self.omega
        return expm(self.C * theta) @ self.Kvec + self.M * np.cos(w * theta) + self.N * np.sin(
            w * theta
        )

    def w1(self, theta: float, y1: float, y2: float) -> float:
        """First (phase) component of the manifold correction w(ϑ)(y)."""
        h = self.h(theta)
        return float(0.5 * (h[0] * y1**2 + 2 * h[2] * y1 * y2 + h[4] * y2**2))


@dataclass(frozen=True)
class ReducedForcing:
    """Taylor coefficients f_ij of f₂ restricted to the center manifold, f₂ ≈ Σ f_ij y₁ⁱ y₂ʲ."""

    f20: float
    f11: float
    f02: float
    f30: float = 0.0
    f21: float = 0.0
    f12: float = 0.0
    f03: float = 0.0

    def partial(self, i: int, j: int) -> float:
        """∂^(i+j) f₂ / ∂y₁ⁱ ∂y₂ʲ at the origin."""
        return math.factorial(i) * math.factorial(j) * getattr(self, f"f{i}{j}")


@dataclass(frozen=True)
class NormalForm:
    """Planar reduced system ẏ₁ = ωy₂ + g₁, ẏ₂ = −ωy₁ + g₂ and its Lyapunov coefficient."""

    a20: float
    a11: float
    a02: float
    a30: float
    a21: float
    a12: float
    a03: float
    b20: float
    b11: float
    b02: float
    b30: float
    b21: float
    b12: float
    b03: float
    omega: float
    a: float

    @property
    def stable(self) -> bool:
        return self.a < 0

    @classmethod
    def from_forcing(
        cls, forcing: ReducedForcing, d12: float, d22: float, omega: float
    ) -> NormalForm:
        """g₁ = d₁₂ f₂ and g₂ = d₂₂ f₂ (the nonlinearity only enters the second equation)."""
        orders = ("20", "11", "02", "30", "21", "12", "03")
        first = {f"a{o}": d12 * getattr(forcing, f"f{o}") for o in orders}
        second = {f"b{o}": d22 * getattr(forcing, f"f{o}") for o in orders}
        keys = [(int(o[0]), int(o[1])) for o in orders]
        g1 = {k: d12 * forcing.partial(*k) for k in keys}
        g2 = {k: d22 * forcing.partial(*k) for k in keys}
        return cls(**first, **second, omega=omega, a=lyapunov_from_partials(g1, g2, omega))


def lyapunov_from_partials(
    g1: dict[tuple[int, int], float], g2: dict[tuple[int, int], float], omega: float
) -> float:
    """
    Cubic normal-form coefficient of ẏ₁ = ωy₂ + g₁, ẏ₂ = −ωy₁ + g₂.

    ``g1[(i, j)]`` is ∂^(i+j)g₁/∂y₁ⁱ∂y₂ʲ at 0. Negative means a stable
    (supercritical) branch of periodic orbits.
    """
    cubic = g2[(0, 3)] + g2[(2, 1)] + g1[(1, 2)] + g1[(3, 0)]
    quadratic = (
        g2[(1, 1)] * (g2[(0, 2)] + g2[(2, 0)])
        - g1[(1, 1)] * (g1[(0, 2)] + g1[(2, 0)])
        - g2[(0, 2)] * g1[(0, 2)]
        + g2[(2, 0)] * g1[(2, 0)]
    )
    return cubic / 16.0 + quadratic / (16.0 * omega)


@dataclass(frozen=True)
class LyapunovPoint:
    mu: float
    tau: float
    omega: float
    a: float
    transversality: int
    n_branch: int
    root_index: int = 0


@dataclass(frozen=True)
class SignChange:
    """Interpolated zero of a along one Hopf curve."""

    mu_star: float
    tau_star: float
    n_branch: int
    root_index: int
    transversality: int


@dataclass(frozen=True)
class LyapunovMap:
    points: tuple[LyapunovPoint, ...] = ()
    failures: tuple[tuple[HopfPoint, str], ...] = ()
    sign_changes: tuple[SignChange, ...] = ()

    @property
    def mu_star(self) -> float | None:
        """First sign change on the Re(λ′) < 0 family (lowest n, then lowest μ)."""
        red = [s for s in self.sign_changes if s.transversality < 0]
        if not red:
            return None
        return min(red, key=lambda s: (s.n_branch, s.mu_star)).mu_star

    @property
    def success_ratio(self) -> float:
        total = len(self.points) + len(self.failures)
        return 1.0 if total == 0 else len(self.points) / total


@dataclass(frozen=True, eq=False)
class Reduction:
    """Every intermediate of the reduction at one Hopf point."""

    eigenfunctions: Eigenfunctions
    quadratic: ReducedForcing
    center: CenterCoeffs
    forcing: ReducedForcing
    normal_form: NormalForm


def _panels(omega: float, tau: float) -> int:
    # keep ωσ within π per panel so the fixed-order rule stays exact
    return max(1, math.ceil(omega * tau / np.pi))


def bilinear_form(
    n_fun: Pair,
    s_fun: Pair,
    lin: SubspaceLinearization,
    tau: float,
    panels: int = 1,
    nodes: int = QUADRATURE_NODES,
) -> NDArray[np.float64]:
    """
    2×2 pairing ⟨nᵢ, sⱼ⟩ = nᵢ(0)ᵀsⱼ(0) + ∫₋τ⁰ nᵢ(σ+τ)ᵀ A_τ sⱼ(σ) dσ.

    ``n_fun`` and ``s_fun`` map an array of arguments to shape ``(..., 2, 2)`` with
    the function index on the second to last axis. The integral uses composite
    Gauss–Legendre quadrature with ``panels`` equal panels of ``nodes`` points.
    """
    G = np.einsum("ia,ja->ij", n_fun(0.0), s_fun(0.0))
    if tau <= 0 or not np.any(lin.Atau):
        return G

    x, wts = leggauss(nodes)
    edges = np.linspace(-tau, 0.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    sigma = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()

    N = n_fun(sigma + tau)
    S = s_fun(sigma)
    return G + np.einsum("k,kia,ab,kjb->ij", weights, N, lin.Atau, S)


def _null_space(matrix: NDArray, label: str) -> NDArray[np.float64]:
    """Orthonormal basis (columns) of a null space that must be exactly two-dimensional."""
    _, sing, vh = np.linalg.svd(matrix)
    nullity = int(np.sum(sing <= NULLSPACE_RTOL * sing[0]))
    if nullity != 2:
        raise DegeneracyError(
            f"{label} boundary system has a {nullity}-dimensional null space (expected 2); "
            f"the critical eigenvalue is not simple (singular values {sing})"
        )
    return vh[-2:].T


def _boundary_matrices(
    omega: float, tau: float, lin: SubspaceLinearization
) -> tuple[NDArray, NDArray]:
    """4×4 boundary systems acting on (c₁; c₂) and on (d₁; d₂)."""
    c, s = np.cos(omega * tau), np.sin(omega * tau)
    I = np.eye(2)  # noqa: E741
    A0, At = lin.A0, lin.Atau
    direct = np.block([[A0 + c * At, omega * I + s * At], [-omega * I - s * At, A0 + c * At]])
    adjoint = np.block(
        [[A0.T + c * At.T, -omega * I - s * At.T], [omega * I + s * At.T, A0.T + c * At.T]]
    )
    return direct, adjoint


def orthonormalize(
    basis: NDArray,
    c1: NDArray,
    c2: NDArray,
    omega: float,
    lin: SubspaceLinearization,
    tau: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Pick (d₁; d₂) in span(basis) with ⟨n, s⟩ = I.

    The pairing is linear in the adjoint coefficients, so the 4×2 least-squares
    problem Σ ξ_k ⟨n(z_k), s⟩ = I fixes the combination; rescaling the basis
    columns leaves the result unchanged.
    """
    panels = _panels(omega, tau)

    def s_fun(th: ArrayLike) -> NDArray:
        return _trig_pair(th, omega, c1, c2)

    columns = []
    for k in range(basis.shape[1]):
        z = basis[:, k]

        def n_fun(th: ArrayLike, z: NDArray = z) -> NDArray:
            return _trig_pair(th, omega, z[:2], z[2:])

        columns.append(bilinear_form(n_fun, s_fun, lin, tau, panels).ravel())

    xi, *_ = np.linalg.lstsq(np.column_stack(columns), np.eye(2).ravel(), rcond=None)
    d = basis @ xi
    return d[:2], d[2:]


def solve_eigenfunctions(hp: HopfPoint, lin: SubspaceLinearization) -> Eigenfunctions:
    """
    Eigenfunction and adjoint coefficients at a Hopf point.

    The s-side is normalized by c₁₁ = 1, c₂₁ = 0; the adjoint side by ⟨n, s⟩ = I,
    re-checked with an independent higher-order quadrature.

    Raises:
        DegeneracyError: for K = 1, for a null space of dimension ≠ 2, or when a
            residual or the orthonormality check fails
    """
    if abs(lin.alpha + lin.beta) <= 1e-12 * (abs(lin.alpha) + abs(lin.beta)):
        raise DegeneracyError(
            "alpha + beta = 0 (K = 1): a zero eigenvalue meets the imaginary pair; "
            "this codimension-two case is not handled"
        )

    omega, tau = hp.omega, hp.tau
    direct, adjoint = _boundary_matrices(omega, tau, lin)

    Z = _null_space(direct, "Eigenfunction")
    try:
        xi = np.linalg.solve(Z[[0, 2], :], np.array([1.0, 0.0]))
    except np.linalg.LinAlgError as e:
        raise DegeneracyError("Cannot impose c11 = 1, c21 = 0 on the eigenfunction") from e
    cvec = Z @ xi
    c1, c2 = cvec[:2], cvec[2:]

    d1, d2 = orthonormalize(_null_space(adjoint, "Adjoint"), c1, c2, omega, lin, tau)
    ef = Eigenfunctions(c1=c1, c2=c2, d1=d1, d2=d2, omega=omega, tau=tau)

    residual = max(
        np.linalg.norm(direct @ cvec), np.linalg.norm(adjoint @ np.concatenate([d1, d2]))
    )
    scale = max(1.0, np.linalg.norm(cvec), np.linalg.norm(d1) + np.linalg.norm(d2))
    if residual > BOUNDARY_TOL * scale:
        raise DegeneracyError(f"Eigenfunction boundary residual {residual:.3e} too large")

    check = bilinear_form(ef.n, ef.s, lin, tau, 2 * ef.panels, CHECK_QUADRATURE_NODES)
    deviation = np.max(np.abs(check - np.eye(2)))
    if deviation > ORTHONORMALITY_TOL:
        raise DegeneracyError(f"<n, s> deviates from the identity by {deviation:.3e}")

    logger.debug(f"✓ Eigenfunctions at mu={hp.mu}, tau={hp.tau}: c={cvec}, d={d1}, {d2}")
    return ef


def f2_partials(
    ef: Eigenfunctions,
    nl: NonlinearCoeffs,
    tau: float,
    w_corr: CenterCoeffs | None = None,
) -> ReducedForcing:
    """
    Taylor coefficients of f₂(x₁(0), x₁(−τ)) on the center manifold.

    x₁(ϑ) = y₁s₁₁(ϑ) + y₂s₂₁(ϑ) + w₁(ϑ). Without ``w_corr`` only the linear
    part is substituted, which is exact at second order; with it, the cross term
    2q·(x₁ + x₁τ)·(w₁(0) + w₁(−τ)) adds to the cubic coefficients.
    """
    at0, atm = ef.s(0.0), ef.s(-tau)
    sa, sb = at0[0, 0] + atm[0, 0], at0[1, 0] + atm[1, 0]
    da, db = atm[0, 0] - at0[0, 0], atm[1, 0] - at0[1, 0]
    q, cm, cp = nl.q, nl.c_minus, nl.c_plus

    f30 = cp * sa**3 + cm * da**3
    f21 = 3 * (cp * sa**2 * sb + cm * da**2 * db)
    f12 = 3 * (cp * sa * sb**2 + cm * da * db**2)
    f03 = cp * sb**3 + cm * db**3

    if w_corr is not None:
        H = w_corr.h0[[0, 2, 4]] + w_corr.htau[[0, 2, 4]]
        f30 += q * sa * H[0]
        f21 += q * (2 * sa * H[1] + sb * H[0])
        f12 += q * (sa * H[2] + 2 * sb * H[1])
        f03 += q * sb * H[2]

    return ReducedForcing(
        f20=float(q * sa**2),
        f11=float(2 * q * sa * sb),
        f02=float(q * sb**2),
        f30=float(f30),
        f21=float(f21),
        f12=float(f12),
        f03=float(f03),
    )


def _checked_solve(matrix: NDArray, rhs: NDArray, label: str) -> NDArray[np.float64]:
    if np.linalg.cond(matrix) > CONDITION_LIMIT:
        raise DegeneracyError(f"{label} is singular (resonance between the critical modes)")
    try:
        x = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as e:
        raise DegeneracyError(f"{label} is singular: {e}") from e

    residual = np.linalg.norm(matrix @ x - rhs)
    if residual > BOUNDARY_TOL * max(1.0, np.linalg.norm(rhs)):
        raise DegeneracyError(f"{label} residual {residual:.3e} too large")
    return x


def _check_exponential(C: NDArray, Kvec: NDArray, tau: float) -> None:
    """Central-difference check of d/dϑ e^(Cϑ)K = C e^(Cϑ)K on [−τ, 0]."""
    step = 1e-5
    scale = 1.0 + np.linalg.norm(Kvec)
    for theta in np.linspace(-tau, 0.0, 5):
        ahead = expm(C * (theta + step)) @ Kvec
        behind = expm(C * (theta - step)) @ Kvec
        fd = (ahead - behind) / (2 * step)
        err = np.linalg.norm(fd - C @ (expm(C * theta) @ Kvec))
        if err > EXPM_CHECK_TOL * scale:
            raise DegeneracyError(f"Matrix exponential check failed at theta={theta}: {err:.3e}")


def solve_center_coeffs(
    ef: Eigenfunctions,
    partials: ReducedForcing,
    lin: SubspaceLinearization,
    hp: HopfPoint,
    published_weights: bool = False,
) -> CenterCoeffs:
    """
    Solve the inhomogeneous h-system and its boundary condition.

    (M, N) come from [[C, −ωI], [ωI, C]](M; N) = −(p; q); Kvec from
    (P + Q e^(−Cτ)) Kvec = p − r − PM − Q(M cos ωτ − N sin ωτ), with
    P = blockdiag(A₀) − C and Q = blockdiag(A_τ).

    Raises:
        DegeneracyError: on a singular system or a failed residual check
    """
    omega, tau = hp.omega, hp.tau
    C = omega * np.kron(_B3, np.eye(2))

    if published_weights:
        weights = np.array([partials.f20, partials.f11, partials.f02])
    else:
        weights = np.array([2 * partials.f20, partials.f11, 2 * partials.f02])

    d12, d22 = ef.d1[1], ef.d2[1]
    p0 = d12 * ef.c1 + d22 * ef.c2
    q0 = d22 * ef.c1 - d12 * ef.c2
    p, q = np.kron(weights, p0), np.kron(weights, q0)
    r = np.kron(weights, _E2)

    I6 = np.eye(6)
    MN = _checked_solve(
        np.block([[C, -omega * I6], [omega * I6, C]]),
        -np.concatenate([p, q]),
        "Particular-solution system",
    )
    M, N = MN[:6], MN[6:]

    E = expm(-C * tau)
    P = np.kron(np.eye(3), lin.A0) - C
    Q = np.kron(np.eye(3), lin.Atau)
    particular_tau = M * np.cos(omega * tau) - N * np.sin(omega * tau)
    Kvec = _checked_solve(
        P + Q @ E, p - r - P @ M - Q @ particular_tau, "Center-manifold boundary system"
    )

    h0 = Kvec + M
    htau = E @ Kvec + particular_tau
    residual = np.linalg.norm(P @ h0 + Q @ htau - (p - r))
    if residual > BOUNDARY_TOL * max(1.0, np.linalg.norm(p - r)):
        raise DegeneracyError(f"h boundary residual {residual:.3e} too large")
    _check_exponential(C, Kvec, tau)

    return CenterCoeffs(
        M=M,
        N=N,
        Kvec=Kvec,
        f20=partials.f20,
        f11=partials.f11,
        f02=partials.f02,
        h0=h0,
        htau=htau,
        C=C,
        omega=omega,
    )


def reduce_at(
    hp: HopfPoint,
    lin: SubspaceLinearization,
    nl: NonlinearCoeffs,
    published_weights: bool = False,
) -> Reduction:
    """Run the full reduction and keep every intermediate."""
    report = check_assumptions(hp, lin)
    if not report.all_hold:
        raise DegeneracyError(
            f"Hopf point (mu={hp.mu}, tau={hp.tau}) fails its assumptions: "
            f"simple={report.simple}, nonresonant={report.nonresonant}, "
            f"transversal={report.transversal}"
        )

    ef = solve_eigenfunctions(hp, lin)
    quadratic = f2_partials(ef, nl, hp.tau)
    center = solve_center_coeffs(ef, quadratic, lin, hp, published_weights)
    forcing = f2_partials(ef, nl, hp.tau, w_corr=center)
    nf = NormalForm.from_forcing(forcing, ef.d1[1], ef.d2[1], hp.omega)
    return Reduction(ef, quadratic, center, forcing, nf)


def lyapunov_a(hp: HopfPoint, lin: SubspaceLinearization, nl: NonlinearCoeffs) -> NormalForm:
    """
    Normal form and first Lyapunov coefficient at ``hp``.

    Returns:
        NormalForm whose ``a`` is negative for stable (supercritical) orbits and
        positive for unstable (subcritical) ones.

    Raises:
        DegeneracyError: when an assumption fails or a sub-solve is singular
    """
    nf = reduce_at(hp, lin, nl).normal_form
    logger.debug(f"✓ a = {nf.a:.6e} at mu={hp.mu}, tau={hp.tau}")
    return nf


def lyapunov_harmonic_balance(
    hp: HopfPoint, lin: SubspaceLinearization, nl: NonlinearCoeffs
) -> float:
    """
    Cubic coefficient from a frequency-domain expansion, independent of the manifold.

    With x₁ = Z e^(iωt) + c.c., second-order harmonics X₀|Z|² and X₂Z²e^(2iωt)
    are solved from Δ(0) and Δ(2iω); the resonant third-order forcing R gives
    Ż = (R / Δ'(iω)) Z|Z|², and the amplitude equation ṙ = a r³ of x₁ = r cos
    has a = Re(R / Δ'(iω)) / 4.
    """
    omega, tau = hp.omega, hp.tau
    q, cm, cp = nl.q, nl.c_minus, nl.c_plus

    shift = np.exp(-1j * omega * tau)
    E = 1 + shift
    D = shift - 1
    E2 = 1 + shift**2

    X0 = 2 * q * abs(E) ** 2 / char_residual(0.0, lin, tau)
    X2 = q * E**2 / char_residual(2j * omega, lin, tau)
    R = (
        2 * q * (2 * E * X0 + np.conj(E) * E2 * X2)
        + 3 * cp * abs(E) ** 2 * E
        + 3 * cm * abs(D) ** 2 * D
    )
    c1 = R / characteristic_derivative(1j * omega, lin, tau)
    return float(c1.real / 4.0)


def lyapunov_report(
    hp: HopfPoint, lin: SubspaceLinearization, nl: NonlinearCoeffs
) -> dict[str, Any]:
    """All intermediates of the reduction at one point, for auditing."""
    red = reduce_at(hp, lin, nl)
    literal = reduce_at(hp, lin, nl, published_weights=True).normal_form.a
    report = check_assumptions(hp, lin)
    ef, cc = red.eigenfunctions, red.center
    return {
        "hopf_point": {
            "K": hp.K,
            "mu": hp.mu,
            "tau": hp.tau,
            "omega": hp.omega,
            "n": hp.n_branch,
            "branch": str(hp.branch),
            "transversality": hp.transversality,
            "crossing_speed": report.crossing_speed,
        },
        "assumptions": {
            "simple": report.simple,
            "nonresonant": report.nonresonant,
            "transversal": report.transversal,
        },
        "eigenfunctions": {"c1": ef.c1, "c2": ef.c2, "d1": ef.d1, "d2": ef.d2},
        "center": {"M": cc.M, "N": cc.N, "Kvec": cc.Kvec, "h0": cc.h0, "htau": cc.htau},
        "quadratic_partials": asdict(red.quadratic),
        "cubic_partials": asdict(red.forcing),
        "normal_form": asdict(red.normal_form),
        "a": red.normal_form.a,
        "a_harmonic_balance": lyapunov_harmonic_balance(hp, lin, nl),
        "a_published_weights": literal,
    }


def _map_point(
    hp: HopfPoint,
    nl_source: Callable[[ModelParams, Equilibrium], NonlinearCoeffs],
    published_weights: bool = False,
) -> tuple[float | None, str]:
    try:
        params, eq = hp.params(), hp.equilibrium()
        nl = nl_source(params, eq)
        nf = reduce_at(hp, hp.linearization(), nl, published_weights).normal_form
    except PllHopfError as e:
        return None, str(e)
    return nf.a, ""


def _sign_changes(curve: HopfCurve, values: Sequence[tuple[HopfPoint, float]]) -> list[SignChange]:
    changes = []
    for (p0, a0), (p1, a1) in zip(values, values[1:], strict=False):
        if a0 == 0 or a0 * a1 < 0:
            frac = 0.0 if a0 == 0 else a0 / (a0 - a1)
            changes.append(
                SignChange(
                    mu_star=p0.mu + frac * (p1.mu - p0.mu),
                    tau_star=p0.tau + frac * (p1.tau - p0.tau),
                    n_branch=curve.n_branch,
                    root_index=curve.root_index,
                    transversality=curve.transversality,
                )
            )
    return changes


def lyapunov_map(
    K: float,
    curves: Sequence[HopfCurve],
    nl_source: Callable[[ModelParams, Equilibrium], NonlinearCoeffs] = nonlinear_coeffs,
    workers: int = 1,
    published_weights: bool = False,
) -> LyapunovMap:
    """
    Evaluate a along every Hopf curve and locate its sign changes.

    Per-point failures are recorded on the result and logged, never raised.
    ``published_weights`` passes unit weights on the squared forcing terms to
    every reduction.
    """
    targets = [hp for curve in curves for hp in curve.points if hp.K == K]
    jobs = [(hp, nl_source, published_weights) for hp in targets]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            results = pool.starmap(_map_point, jobs)
    else:
        results = [_map_point(*job) for job in jobs]
    outcome = iter(results)

    points: list[LyapunovPoint] = []
    failures: list[tuple[HopfPoint, str]] = []
    changes: list[SignChange] = []
    for curve in curves:
        values = []
        for hp in curve.points:
            if hp.K != K:
                continue
            a, message = next(outcome)
            if a is None:
                logger.warning(
                    f"⚠️ Lyapunov coefficient failed at mu={hp.mu}, tau={hp.tau}: {message}"
                )
                failures.append((hp, message))
                continue
            values.append((hp, a))
            points.append(
                LyapunovPoint(
                    mu=hp.mu,
                    tau=hp.tau,
                    omega=hp.omega,
                    a=a,
                    transversality=hp.transversality,
                    n_branch=hp.n_branch,
                    root_index=curve.root_index,
                )
            )
        changes.extend(_sign_changes(curve, values))

    points.sort(key=lambda p: (p.mu, p.n_branch, p.tau))
    logger.info(
        f"✓ Lyapunov map: {len(points)} points, {len(failures)} failures, "
        f"{len(changes)} sign changes"
    )
    return LyapunovMap(tuple(points), tuple(failures), tuple(changes))
