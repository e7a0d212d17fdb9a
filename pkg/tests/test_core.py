"""Tests for the PllHopfAnalyzer pipeline."""

import logging

import numpy as np
import pytest

from pllhopf.centermanifold import LyapunovMap, LyapunovPoint
from pllhopf.config import RunConfig
from pllhopf.core import REFERENCE_POINTS, PllHopfAnalyzer, tolerance_table
from pllhopf.ddesim import OrbitClass, SideScanEntry, Verdict
from pllhopf.exceptions import DegeneracyError, DomainError
from pllhopf.model import Branch
from pllhopf.spectrum import AssumptionReport, HopfCurve, HopfPoint, hopf_points_at


def _analyzer(**values):
    return PllHopfAnalyzer(RunConfig.from_mapping(values))


def _orbit(verdict, drift=None, period=12.0):
    return OrbitClass(
        verdict=verdict,
        amplitude_series=(0.05, 0.049, 0.048),
        period_estimate=period,
        drift_slope=drift,
    )


class TestToleranceTable:
    """Test the reported tolerance constants."""

    def test_contains_module_constants(self):
        """Test that constants of every numerical module are listed."""
        table = tolerance_table()

        assert table["core.PERIOD_TOL"] == 0.05
        assert table["ddesim.ESCAPE_RADIUS"] == pytest.approx(np.pi / 2)
        assert table["ddesim.DIVERGENCE_NORM"] == 1e6
        assert any(key.startswith("spectrum.") for key in table)
        assert any(key.startswith("centermanifold.") for key in table)

    def test_values_are_floats(self):
        """Test that every entry is a plain float."""
        assert all(type(v) is float for v in tolerance_table().values())


class TestAnalyzerSetup:
    """Test analyzer construction and derived settings."""

    def test_config_dict(self, tmp_path, monkeypatch):
        """Test that a config dict is merged over the defaults."""
        monkeypatch.chdir(tmp_path)
        analyzer = PllHopfAnalyzer(config_dict={"K": 1.2, "n_range": "1..3", "branch": "plus"})

        assert analyzer.config.K == 1.2
        assert analyzer.branch is Branch.PLUS
        assert list(analyzer.n_values) == [1, 2, 3]

    def test_config_file(self, config_file):
        """Test loading an analyzer from a file."""
        analyzer = PllHopfAnalyzer(config_path=config_file)

        assert analyzer.config.K == 1.1
        assert analyzer.config.mu_range == (0.1, 0.01, 0.2)

    def test_equilibria(self):
        """Test that the table has both branches for every n."""
        eqs = _analyzer(n_range=(0, 2)).equilibria()
        assert len(eqs) == 6


class TestLocatePoint:
    """Test Hopf point lookup."""

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_named_points(self, name):
        """Test that named points resolve to the reference delays."""
        hp = _analyzer(point=name).locate_point()
        mu, tau = REFERENCE_POINTS[name]

        assert hp.mu == mu
        assert abs(hp.tau - tau) < 0.02
        assert hp.K == 1.05

    def test_named_point_overrides_gain(self, caplog):
        """Test that a named point ignores a different K with a warning."""
        with caplog.at_level(logging.WARNING):
            hp = _analyzer(point="A", K=1.3).locate_point()

        assert hp.K == 1.05
        assert "ignoring K=1.3" in caplog.text

    def test_lowest_delay_without_tau(self):
        """Test that the lowest Hopf delay is chosen when tau is omitted."""
        hp = _analyzer(mu=0.15, n_range=(0, 3)).locate_point()

        found = hopf_points_at(1.05, 0.15, range(0, 4), Branch.MINUS)
        assert hp.tau == min(p.tau for _, p in found)

    def test_far_delay_raises(self):
        """Test that a delay with no nearby Hopf point raises DomainError."""
        with pytest.raises(DomainError):
            _analyzer(mu=0.15, tau=1000.0, n_range=(0, 0)).locate_point()

    def test_default_offsets(self):
        """Test that one offset precedes the Hopf delay and three follow it."""
        assert _analyzer()._offsets(10.0) == pytest.approx([-0.1, 0.0, 0.1, 0.2, 0.3])

    def test_default_offsets_follow_transversality(self):
        """Test that a negative crossing puts the three offsets below the Hopf delay."""
        offsets = _analyzer()._offsets(10.0, transversality=-1)
        assert offsets == pytest.approx([-0.3, -0.2, -0.1, 0.0, 0.1])

    def test_custom_offsets_include_zero(self):
        """Test that 0 is always part of the scan."""
        assert _analyzer(offsets=(0.05, -0.02))._offsets(10.0) == [-0.02, 0.0, 0.05]


class TestVerify:
    """Test the analytic versus simulated criticality check."""

    def test_consistent_at_supercritical_point(self, mocker):
        """Test that a growing 1/r^2 at A agrees with a < 0."""
        scan = [
            SideScanEntry(-0.07, _orbit(Verdict.DECAYS)),
            SideScanEntry(0.0, _orbit(Verdict.DECAYS, drift=0.03)),
            SideScanEntry(0.07, _orbit(Verdict.CONVERGES)),
        ]
        side_scan = mocker.patch("pllhopf.core.hopf_side_scan", return_value=scan)

        report = _analyzer(point="A", workers=1).verify()

        assert report["sign_a"] == -1
        assert report["empirical_sign"] == -1
        assert report["consistent"] is True
        assert report["lyapunov_estimate"] == pytest.approx(-0.015)
        assert report["period"]["within_tolerance"]
        assert report["hopf_point"]["branch"] == "minus"
        assert [e["offset"] for e in report["side_scan"]] == [-0.07, 0.0, 0.07]

        offsets = side_scan.call_args.args[2]
        assert 0.0 in offsets
        assert side_scan.call_args.kwargs["amp"] == 5e-2

    def test_inconsistent_when_signs_disagree(self, mocker):
        """Test that an escaping critical run contradicts a < 0."""
        scan = [SideScanEntry(0.0, _orbit(Verdict.GROWS))]
        mocker.patch("pllhopf.core.hopf_side_scan", return_value=scan)

        report = _analyzer(point="A").verify()

        assert report["empirical_sign"] == 1
        assert report["consistent"] is False
        assert report["amplitude_law"] is None

    def test_period_outside_tolerance(self, mocker):
        """Test that a wrong measured period is flagged."""
        scan = [SideScanEntry(0.0, _orbit(Verdict.CONVERGES, drift=-0.1, period=20.0))]
        mocker.patch("pllhopf.core.hopf_side_scan", return_value=scan)

        report = _analyzer(point="B").verify()

        assert report["period"]["within_tolerance"] is False
        assert report["period"]["relative_error"] > 0.05

    def test_failed_assumptions_raise(self, mocker):
        """Test that a degenerate Hopf point is refused before simulating."""
        mocker.patch(
            "pllhopf.core.check_assumptions",
            return_value=AssumptionReport(simple=False, nonresonant=True, transversal=True),
        )
        side_scan = mocker.patch("pllhopf.core.hopf_side_scan")

        with pytest.raises(DegeneracyError):
            _analyzer(point="A").verify()
        side_scan.assert_not_called()


@pytest.mark.slow
class TestVerifyReferencePoints:
    """Test the full verification at the named Hopf points."""

    @pytest.mark.parametrize("name", ["A", "B", "C"])
    def test_reference_point_is_consistent(self, name):
        """Test that simulation confirms the sign of a and the period 2 pi / omega."""
        report = _analyzer(point=name, workers=5).verify()

        assert report["consistent"] is True
        assert report["period"]["within_tolerance"]

    def test_amplitude_law_at_point_a(self):
        """Test that the default scan at A fits amplitude squared linearly in the offset."""
        report = _analyzer(point="A", workers=5).verify()

        assert report["period"]["relative_error"] < 1e-2
        assert report["amplitude_law"] is not None
        assert report["amplitude_law"]["slope"] > 0
        assert report["amplitude_law"]["r2"] > 0.98


class TestLyapunovMapWeights:
    """Test the weight choice passed to the Lyapunov map."""

    @pytest.mark.parametrize("flag", [False, True])
    def test_flag_is_forwarded(self, mocker, flag):
        """Test that published_weights reaches the map evaluation."""
        run = mocker.patch("pllhopf.core.lyapunov_map", return_value=LyapunovMap())

        _analyzer(published_weights=flag).lyapunov_map(curves=[])

        assert run.call_args.kwargs["published_weights"] is flag

    def test_literal_weights_warn(self, mocker, caplog):
        """Test that choosing the literal weights is logged as a warning."""
        mocker.patch("pllhopf.core.lyapunov_map", return_value=LyapunovMap())

        with caplog.at_level(logging.WARNING):
            _analyzer(published_weights="yes").lyapunov_map(curves=[])

        assert "unit weights" in caplog.text


class TestSimulate:
    """Test the simulation entry point."""

    def test_subspace_by_default(self, minus_eq):
        """Test that without N the synchronized model is integrated."""
        traj = _analyzer(tau=2.0, t_end=30.0, steps_per_delay=20, eps=1e-3).simulate()

        assert traj.labels == ("x1", "x2")
        assert traj.states[0, 0] == pytest.approx(minus_eq.phi + 1e-3)
        assert traj.dt == pytest.approx(0.1)

    def test_network_histories_are_scaled(self, minus_eq):
        """Test that node i starts at eps * (i + 1) / N."""
        traj = _analyzer(tau=2.0, t_end=30.0, steps_per_delay=20, eps=3e-3, N=3).simulate()

        assert traj.is_network
        assert traj.nodes == 3
        np.testing.assert_allclose(
            traj.states[0, :3], minus_eq.phi + np.array([1e-3, 2e-3, 3e-3]), atol=1e-12
        )
        assert traj.sync_deviation[0] == pytest.approx(2e-3)


class TestRows:
    """Test output row builders."""

    def test_hopf_rows_sorted_by_mu_then_n(self):
        """Test that points of several curves are merged in mu order."""

        def hp(mu, tau, n):
            return HopfPoint(mu=mu, tau=tau, omega=0.5, n_branch=n, transversality=1, K=1.05)

        curves = [
            HopfCurve(points=(hp(0.1, 20.0, 1), hp(0.2, 21.0, 1)), branch=Branch.MINUS, n_branch=1),
            HopfCurve(points=(hp(0.1, 7.0, 0), hp(0.2, 8.0, 0)), branch=Branch.MINUS, n_branch=0),
        ]
        rows = PllHopfAnalyzer.hopf_rows(curves)

        assert [(r["mu"], r["n"]) for r in rows] == [(0.1, 0), (0.1, 1), (0.2, 0), (0.2, 1)]
        assert list(rows[0]) == ["mu", "tau", "omega", "n", "transversality_sign"]

    def test_lyapunov_rows(self):
        """Test that Lyapunov rows carry the coefficient and the crossing sign."""
        point = LyapunovPoint(mu=0.3, tau=11.0, omega=0.5, a=0.35, transversality=-1, n_branch=0)
        rows = PllHopfAnalyzer.lyapunov_rows(LyapunovMap(points=(point,)))

        assert rows == [
            {"mu": 0.3, "tau": 11.0, "omega": 0.5, "a": 0.35, "transversality_sign": -1}
        ]

    def test_equilibrium_rows(self):
        """Test that equilibrium rows use branch names."""
        rows = PllHopfAnalyzer.equilibrium_rows(_analyzer(n_range=(0, 0)).equilibria())
        assert [r["branch"] for r in rows] == ["plus", "minus"]
