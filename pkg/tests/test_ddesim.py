"""Tests for the method-of-steps integrator and orbit classification."""

import numpy as np
import pytest

from pllhopf.ddesim import (
    MIN_STEPS_PER_DELAY,
    HistoryFunction,
    HistoryKind,
    OrbitClass,
    SideScanEntry,
    Trajectory,
    Verdict,
    _verdict,
    amplitude_law,
    classify_orbit,
    critical_drift,
    empirical_criticality,
    hopf_side_scan,
    integrate_network,
    integrate_subspace,
    steps_per_delay,
)
from pllhopf.exceptions import DivergenceError, DomainError
from pllhopf.model import ModelParams


def _synthetic(eq, amplitude, periods, period=10.0, samples=200):
    t = np.linspace(0.0, periods * period, periods * samples + 1)
    x = amplitude(t) * np.sin(2 * np.pi * t / period)
    states = np.column_stack([eq.phi + x, np.zeros_like(x)])
    return Trajectory(
        times=t,
        states=states,
        slopes=np.zeros_like(states),
        tau=1.0,
        dt=float(t[1]),
        labels=("x1", "x2"),
    )


def _orbit(verdict, drift=None):
    return OrbitClass(verdict, (0.1,) * 5, 10.0, drift, verdict is Verdict.GROWS)


class TestHistoryFunction:
    """Initial data on [-tau, 0]."""

    def test_perturbed_equilibrium(self, minus_eq):
        """The default history offsets the phase only."""
        h = HistoryFunction.perturbed_equilibrium(minus_eq, 5.0, 0.01)
        assert h.kind is HistoryKind.EQUILIBRIUM_PERTURBATION
        np.testing.assert_allclose(h(-2.0), [minus_eq.phi + 0.01, 0.0])
        np.testing.assert_allclose(h.derivative(-2.0), [0.0, 0.0])

    @pytest.mark.parametrize("t", [-5.1, 0.1])
    def test_outside_interval_raises(self, t):
        """Evaluating outside [-tau, 0] raises DomainError."""
        h = HistoryFunction.constant([0.0, 0.0], 5.0)
        with pytest.raises(DomainError):
            h(t)

    def test_sampled_interpolates(self):
        """A sampled history reproduces a smooth function and its slope."""
        t = np.linspace(-4.0, 0.0, 81)
        values = np.column_stack([np.cos(t), -np.sin(t)])
        h = HistoryFunction.sampled(t, values)
        assert h.kind is HistoryKind.SAMPLED
        assert h.tau == pytest.approx(4.0)
        np.testing.assert_allclose(h(-1.234), [np.cos(-1.234), -np.sin(-1.234)], atol=1e-6)
        np.testing.assert_allclose(h.derivative(-1.234)[0], -np.sin(-1.234), atol=1e-4)

    def test_sampled_must_end_at_zero(self):
        """Samples that stop before t = 0 are rejected."""
        with pytest.raises(DomainError):
            HistoryFunction.sampled([-2.0, -1.0], [[0.0, 0.0], [0.0, 0.0]])


class TestStepping:
    """Grid and domain checks."""

    def test_steps_per_delay(self):
        """dt = tau/m yields m."""
        assert steps_per_delay(7.0, 7.0 / 40) == 40

    @pytest.mark.parametrize("dt", [0.33, 7.0 / (MIN_STEPS_PER_DELAY - 1)])
    def test_bad_step_raises(self, dt):
        """Steps that do not divide tau, or are too coarse, raise DomainError."""
        with pytest.raises(DomainError):
            steps_per_delay(7.0, dt)

    def test_short_horizon_raises(self, params_a, minus_eq):
        """t_end must exceed ten delays."""
        with pytest.raises(DomainError):
            integrate_subspace(params_a, minus_eq, t_end=5 * params_a.tau)

    def test_equilibrium_is_fixed_point(self, params_a, minus_eq):
        """An equilibrium history stays put to 1e-10 over 100 tau."""
        history = HistoryFunction.perturbed_equilibrium(minus_eq, params_a.tau, 0.0)
        traj = integrate_subspace(params_a, minus_eq, history, t_end=100 * params_a.tau)
        assert np.max(np.abs(traj.states[:, 0] - minus_eq.phi)) < 1e-10
        assert np.max(np.abs(traj.states[:, 1])) < 1e-10
        assert classify_orbit(traj, minus_eq).verdict is Verdict.DECAYS

    def test_fourth_order_self_convergence(self, params_a, minus_eq):
        """Halving dt shrinks the state difference at t = 5 tau by about 16."""
        tau = params_a.tau
        history = HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.1)
        ends = []
        for m in (20, 40, 80):
            traj = integrate_subspace(params_a, minus_eq, history, t_end=11 * tau, dt=tau / m)
            ends.append(traj.states[5 * m])
        ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
        assert 12 <= ratio <= 20

    def test_dense_output(self, params_a, minus_eq):
        """The interpolant hits the nodes and tracks a finer run between them."""
        tau = params_a.tau
        history = HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.1)
        coarse = integrate_subspace(params_a, minus_eq, history, t_end=11 * tau, dt=tau / 40)
        fine = integrate_subspace(params_a, minus_eq, history, t_end=11 * tau, dt=tau / 80)

        np.testing.assert_allclose(coarse.dense(coarse.times[:50]), coarse.states[:50])
        midpoints = fine.times[1:200:2]
        np.testing.assert_allclose(coarse.dense(midpoints), fine.states[1:200:2], atol=1e-5)
        with pytest.raises(DomainError):
            coarse.dense([-1.0])

    def test_divergence_keeps_partial_trajectory(self, params_a, minus_eq):
        """A state beyond the norm cutoff raises with the partial trajectory attached."""
        history = HistoryFunction.constant([2e6, 0.0], params_a.tau)
        with pytest.raises(DivergenceError) as exc_info:
            integrate_subspace(params_a, minus_eq, history, t_end=20 * params_a.tau)
        traj = exc_info.value.trajectory
        assert traj is not None
        assert traj.diverged
        assert traj.states[0, 0] == 2e6

    def test_deterministic(self, params_a, minus_eq):
        """Identical inputs give bit-identical trajectories."""
        first = integrate_subspace(params_a, minus_eq, t_end=11 * params_a.tau)
        second = integrate_subspace(params_a, minus_eq, t_end=11 * params_a.tau)
        assert np.array_equal(first.states, second.states)


class TestNetwork:
    """Full N-node integration."""

    def test_identical_histories_stay_synchronized(self, point_a, minus_eq):
        """Identical histories keep all nodes together over 100 tau."""
        params = ModelParams(K=point_a.K, mu=point_a.mu, tau=point_a.tau, N=4)
        histories = [HistoryFunction.perturbed_equilibrium(minus_eq, point_a.tau, 0.05)] * 4
        traj = integrate_network(params, histories, t_end=100 * point_a.tau)
        assert np.max(traj.sync_deviation) < 1e-9
        assert traj.header()[-1] == "sync_deviation"
        assert len(traj.to_rows()[0]) == 1 + 8 + 1

    def test_matches_subspace(self, point_a, minus_eq):
        """Node 1 of a synchronized network follows the subspace model."""
        tau = point_a.tau
        history = HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.05)
        sub = integrate_subspace(point_a.params(), minus_eq, history, t_end=20 * tau)
        net = integrate_network(point_a.params(4), [history] * 4, t_end=20 * tau)
        np.testing.assert_allclose(net.states[:, 0], sub.states[:, 0], atol=1e-7)
        np.testing.assert_allclose(net.states[:, 4], sub.states[:, 1], atol=1e-7)

    def test_coupling_normalization(self, point_a, minus_eq):
        """N = 2 and N = 8 give the same synchronized dynamics."""
        tau = point_a.tau
        history = HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.05)
        two = integrate_network(point_a.params(2), [history] * 2, t_end=20 * tau)
        eight = integrate_network(point_a.params(8), [history] * 8, t_end=20 * tau)
        np.testing.assert_allclose(two.states[:, 0], eight.states[:, 0], atol=1e-9)

    def test_history_count_mismatch(self, point_a, minus_eq):
        """One history per node is required."""
        history = HistoryFunction.perturbed_equilibrium(minus_eq, point_a.tau, 0.05)
        with pytest.raises(DomainError):
            integrate_network(point_a.params(3), [history] * 2, t_end=20 * point_a.tau)

    def test_distinct_histories_report_deviation(self, point_a, minus_eq):
        """Different initial phases show up in the deviation column."""
        tau = point_a.tau
        histories = [
            HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.01),
            HistoryFunction.perturbed_equilibrium(minus_eq, tau, 0.02),
        ]
        traj = integrate_network(point_a.params(2), histories, t_end=11 * tau)
        assert traj.sync_deviation[0] == pytest.approx(0.01)


class TestClassification:
    """Verdict rules on synthetic signals."""

    def test_constant_amplitude_converges(self, minus_eq):
        """A steady oscillation converges to a periodic orbit."""
        traj = _synthetic(minus_eq, lambda t: 0.1 + 0 * t, 20)
        orbit = classify_orbit(traj, minus_eq, settle_fraction=0.0)
        assert orbit.verdict is Verdict.CONVERGES
        assert orbit.period_estimate == pytest.approx(10.0, rel=1e-3)
        assert orbit.amplitude_series[-1] == pytest.approx(0.1, rel=1e-3)

    def test_geometric_growth(self, minus_eq):
        """Ten percent growth per period is classified as growing."""
        traj = _synthetic(minus_eq, lambda t: 1e-3 * 1.1 ** (t / 10.0), 20)
        orbit = classify_orbit(traj, minus_eq, settle_fraction=0.0)
        assert orbit.verdict is Verdict.GROWS
        assert not orbit.escaped

    def test_geometric_decay(self, minus_eq):
        """Ten percent decay per period is classified as decaying."""
        traj = _synthetic(minus_eq, lambda t: 1e-2 * 0.9 ** (t / 10.0), 20)
        assert classify_orbit(traj, minus_eq, settle_fraction=0.0).verdict is Verdict.DECAYS

    def test_slow_decay_is_not_convergence(self, minus_eq):
        """A 0.2% decay per period over 40 periods is decaying, not converged."""
        traj = _synthetic(minus_eq, lambda t: 0.05 * 0.998 ** (t / 10.0), 40)
        assert classify_orbit(traj, minus_eq, settle_fraction=0.0).verdict is Verdict.DECAYS

    def test_slow_growth_is_not_convergence(self, minus_eq):
        """A 0.2% growth per period over 40 periods is growing, not converged."""
        traj = _synthetic(minus_eq, lambda t: 0.05 * 1.002 ** (t / 10.0), 40)
        assert classify_orbit(traj, minus_eq, settle_fraction=0.0).verdict is Verdict.GROWS

    def test_noisy_flat_tail_converges(self):
        """Small jitter around a constant amplitude still converges."""
        rng = np.random.default_rng(0)
        amplitudes = 0.05 * (1 + 5e-4 * rng.standard_normal(40))
        assert _verdict(amplitudes) is Verdict.CONVERGES

    def test_wide_flat_tail_is_undecided(self):
        """A flat but scattered tail is neither converged nor trending."""
        amplitudes = 0.05 * (1 + 0.05 * np.array([1, -1, 1, -1, 1, 1, -1, 1, -1, 1]))
        assert _verdict(amplitudes) is Verdict.UNDECIDED

    def test_escape(self, minus_eq):
        """Leaving the pi/2 neighbourhood counts as growth."""
        traj = _synthetic(minus_eq, lambda t: 0.2 * 1.3 ** (t / 10.0), 20)
        orbit = classify_orbit(traj, minus_eq)
        assert orbit.verdict is Verdict.GROWS
        assert orbit.escaped

    def test_too_few_periods(self, minus_eq):
        """Fewer than five periods is undecided."""
        traj = _synthetic(minus_eq, lambda t: 0.1 + 0 * t, 4)
        assert classify_orbit(traj, minus_eq, settle_fraction=0.0).verdict is Verdict.UNDECIDED

    def test_critical_drift_recovers_coefficient(self):
        """1/r^2 drifts with slope -2a for r' = a r^3."""
        a, r0 = -0.02, 0.1
        t = np.linspace(0.0, 500.0, 40)
        r = (r0**-2 - 2 * a * t) ** -0.5
        assert critical_drift(t, r) == pytest.approx(-2 * a, rel=1e-9)
        assert critical_drift(t[:3], r[:3]) is None


class TestCriticality:
    """Deciding super/subcriticality from side scans."""

    def test_growth_at_zero_offset_is_subcritical(self):
        """An escape at the Hopf delay means a > 0."""
        scan = [SideScanEntry(0.0, _orbit(Verdict.GROWS))]
        assert empirical_criticality(scan, 1) == 1

    @pytest.mark.parametrize("drift,expected", [(0.5, -1), (-0.5, 1)])
    def test_drift_sign(self, drift, expected):
        """Rising 1/r^2 means a < 0, falling means a > 0."""
        scan = [SideScanEntry(0.0, _orbit(Verdict.UNDECIDED, drift))]
        assert empirical_criticality(scan, 1) == expected

    def test_pattern_fallback(self):
        """Without a drift, the side verdicts decide."""
        super_scan = [
            SideScanEntry(-0.1, _orbit(Verdict.DECAYS)),
            SideScanEntry(0.1, _orbit(Verdict.CONVERGES)),
        ]
        sub_scan = [SideScanEntry(-0.1, _orbit(Verdict.GROWS))]
        assert empirical_criticality(super_scan, 1) == -1
        assert empirical_criticality(sub_scan, 1) == 1
        assert empirical_criticality([], 1) == 0

    def test_amplitude_law(self):
        """amplitude^2 linear in the offset gives R^2 = 1."""
        scan = [
            SideScanEntry(d, OrbitClass(Verdict.CONVERGES, (np.sqrt(2 * d),) * 5, 10.0))
            for d in (0.02, 0.04, 0.06)
        ]
        slope, r2 = amplitude_law(scan, 1)
        assert slope == pytest.approx(2.0)
        assert r2 == pytest.approx(1.0)
        assert amplitude_law(scan, -1) is None

    def test_offset_too_large(self, point_a):
        """Offsets beyond 5% of tau are rejected."""
        with pytest.raises(DomainError):
            hopf_side_scan(point_a, point_a.params(), [0.1 * point_a.tau])


@pytest.mark.slow
class TestReferenceSimulations:
    """Direct simulation near the reference Hopf points."""

    def test_stable_orbit_past_point_a(self, point_a, minus_eq):
        """At tau = 7.5315 the orbit converges with a period near 12.04."""
        params = point_a.params().with_tau(7.5315)
        history = HistoryFunction.perturbed_equilibrium(minus_eq, 7.5315, 0.1)
        traj = integrate_subspace(params, minus_eq, history, t_end=800 * 7.5315)
        orbit = classify_orbit(traj, minus_eq)
        assert orbit.verdict is Verdict.CONVERGES
        assert orbit.period_estimate == pytest.approx(12.0364, rel=0.05)

    def test_slow_decay_below_point_c(self, point_c, minus_eq):
        """At tau = 7.00 a small perturbation rings with a period near 8.87."""
        params = point_c.params().with_tau(7.0)
        history = HistoryFunction.perturbed_equilibrium(minus_eq, 7.0, 1e-3)
        traj = integrate_subspace(params, minus_eq, history)
        orbit = classify_orbit(traj, minus_eq)
        assert not orbit.escaped
        assert orbit.period_estimate == pytest.approx(8.8704, rel=0.05)

    @pytest.mark.parametrize("name,expected", [("point_a", -1), ("point_b", 1), ("point_c", 1)])
    def test_criticality_at_hopf_delay(self, request, name, expected):
        """The drift at the Hopf delay matches the sign of a."""
        hp = request.getfixturevalue(name)
        scan = hopf_side_scan(hp, hp.params(), [0.0])
        assert empirical_criticality(scan, hp.transversality) == expected
        if not scan[0].orbit.escaped:
            assert scan[0].orbit.period_estimate == pytest.approx(2 * np.pi / hp.omega, rel=0.05)

    def test_amplitude_law_past_point_a(self, point_a):
        """Orbits born at A grow like the square root of the delay offset."""
        offsets = [f * point_a.tau for f in (0.01, 0.02, 0.03)]
        scan = hopf_side_scan(point_a, point_a.params(), offsets, workers=3)

        assert [e.orbit.verdict for e in scan] == [Verdict.CONVERGES] * 3
        slope, r2 = amplitude_law(scan, point_a.transversality)
        assert slope == pytest.approx(1.05, rel=0.2)
        assert r2 > 0.98
