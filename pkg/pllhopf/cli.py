import argparse
import dataclasses
import json
import sys
from collections.abc import Callable
from pathlib import Path

from .config import RunConfig, build_run_config
from .core import REFERENCE_POINTS, PllHopfAnalyzer, tolerance_table
from .exceptions import (
    ConfigurationError,
    DegeneracyError,
    DivergenceError,
    DomainError,
    PllHopfError,
)
from .utils import write_csv, write_json

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_INCONSISTENT = 3
EXIT_DIVERGED = 4

MIN_SUCCESS_RATIO = 0.9


def _version_text() -> str:
    from . import __version__

    return json.dumps({"pllhopf": __version__, "tolerances": tolerance_table()}, indent=2)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to configuration file (JSON/YAML)", type=str)
    common.add_argument("--verbose", action="store_true", help="Enable verbose logging")
    common.add_argument("--K", type=float, help="Coupling gain K")
    common.add_argument(
        "--branch", choices=["plus", "minus"], help="Equilibrium branch (default: minus)"
    )
    common.add_argument("--output", dest="output_path", help="Output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], help="Output format")
    common.add_argument("--workers", type=int, help="Worker processes for sweeps and scans")
    return common


def _simulation_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Simulation Options")
    group.add_argument("--dt", type=float, help="Step size; must equal tau/m with m >= 20")
    group.add_argument("--steps-per-delay", type=int, help="Steps per delay when --dt is omitted")
    group.add_argument(
        "--t-end", type=float, help="Final time (default: 200*tau, 1500*tau for verify)"
    )
    group.add_argument(
        "--settle-fraction", type=float, help="Leading fraction discarded before classifying"
    )


def parse_args(args=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="pllhopf",
        description="Hopf bifurcations and their criticality in delay-coupled PLL networks",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=_version_text())
    common = _common_options()
    sub = parser.add_subparsers(dest="command", required=True)

    equilibria = sub.add_parser("equilibria", parents=[common], help="Tabulate equilibria")
    equilibria.add_argument("--n", dest="n_range", help="Winding index range lo..hi")

    sweeps = {}
    for name, help_text in (
        ("hopf", "Trace Hopf curves in the (mu, tau) plane"),
        ("lyapunov", "First Lyapunov coefficient along the Hopf curves"),
    ):
        sweep = sub.add_parser(name, parents=[common], help=help_text)
        sweep.add_argument("--mu", dest="mu_range", help="mu sweep start:step:stop")
        sweep.add_argument("--n", dest="n_range", help="Delay branch range lo..hi")
        sweeps[name] = sweep
    sweeps["lyapunov"].add_argument(
        "--published-weights",
        action="store_true",
        default=None,
        help=(
            "Use unit weights on the squared forcing terms of the h-system. The default "
            "factor 2 is confirmed by harmonic balance and gives a > 0 at C and no "
            "sign change on the Re(lambda') < 0 family; this flag reproduces the "
            "literal weights for comparison"
        ),
    )

    verify = sub.add_parser(
        "verify", parents=[common], help="Check sign(a) against direct simulation"
    )
    verify.add_argument("--point", type=str.upper, choices=sorted(REFERENCE_POINTS))
    verify.add_argument("--mu", type=float, help="mu of the Hopf point")
    verify.add_argument("--tau", type=float, help="Approximate delay of the Hopf point")
    verify.add_argument("--n", dest="n_range", help="Delay branch range lo..hi")
    verify.add_argument("--N", type=int, help="Node count used for the model parameters")
    verify.add_argument("--offsets", help="Comma separated delay offsets (0 is always added)")
    verify.add_argument("--scan-amplitude", type=float, help="History perturbation for the scan")
    _simulation_options(verify)

    simulate = sub.add_parser("simulate", parents=[common], help="Integrate the delay equations")
    simulate.add_argument("--point", type=str.upper, choices=sorted(REFERENCE_POINTS))
    simulate.add_argument("--mu", type=float, help="Loop parameter mu")
    simulate.add_argument("--tau", type=float, help="Delay (default: lowest Hopf delay at mu)")
    simulate.add_argument("--N", type=int, help="Integrate the N-node network instead")
    simulate.add_argument("--eps", type=float, help="Phase perturbation of the history")
    simulate.add_argument(
        "--identical-history",
        action="store_true",
        default=None,
        help="Give every node the same history",
    )
    _simulation_options(simulate)

    return parser.parse_args(args)


def _overrides(args: argparse.Namespace) -> dict:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    return {k: v for k, v in vars(args).items() if k in fields and v is not None}


def _emit_rows(cfg: RunConfig, rows: list) -> None:
    if cfg.format == "json":
        write_json(rows, cfg.output_path)
    elif rows:
        write_csv(list(rows[0]), [list(r.values()) for r in rows], cfg.output_path)


def cmd_equilibria(analyzer: PllHopfAnalyzer) -> int:
    rows = analyzer.equilibrium_rows(analyzer.equilibria())
    _emit_rows(analyzer.config, rows)
    return EXIT_OK


def cmd_hopf(analyzer: PllHopfAnalyzer) -> int:
    cfg = analyzer.config
    curves = analyzer.hopf_curves()
    rows = analyzer.hopf_rows(curves)
    if rows or cfg.format == "json":
        _emit_rows(cfg, rows)
    else:
        write_csv(["mu", "tau", "omega", "n", "transversality_sign"], [], cfg.output_path)

    if rows:
        mus = [r["mu"] for r in rows]
        taus = [r["tau"] for r in rows]
        print(
            f"✅ {len(curves)} Hopf curves, mu in [{min(mus):g}, {max(mus):g}], "
            f"tau in [{min(taus):.6g}, {max(taus):.6g}]",
            file=sys.stderr,
        )
    else:
        print("✅ No Hopf points in the requested window", file=sys.stderr)
    return EXIT_OK


def _write_failures(output_path: str | None, failures) -> None:
    if not failures or output_path is None:
        return
    sidecar = Path(output_path).expanduser().with_suffix(".failures.csv")
    write_csv(
        ["mu", "tau", "n", "message"],
        [[hp.mu, hp.tau, hp.n_branch, message] for hp, message in failures],
        sidecar,
    )


def cmd_lyapunov(analyzer: PllHopfAnalyzer) -> int:
    cfg = analyzer.config
    lmap = analyzer.lyapunov_map()
    rows = analyzer.lyapunov_rows(lmap)

    if cfg.format == "json":
        write_json(
            {
                "points": rows,
                "sign_changes": [dataclasses.asdict(s) for s in lmap.sign_changes],
                "mu_star": lmap.mu_star,
                "failures": [
                    {"mu": hp.mu, "tau": hp.tau, "n": hp.n_branch, "message": message}
                    for hp, message in lmap.failures
                ],
            },
            cfg.output_path,
        )
    else:
        header = ["mu", "tau", "omega", "a", "transversality_sign"]
        write_csv(header, [list(r.values()) for r in rows], cfg.output_path)
    _write_failures(cfg.output_path, lmap.failures)

    if lmap.mu_star is not None:
        print(f"✅ mu* = {lmap.mu_star:.6g} (sign change of a, Re(lambda') < 0)", file=sys.stderr)
    for change in lmap.sign_changes:
        if change.transversality > 0:
            print(
                f"   a changes sign at mu = {change.mu_star:.6g} on n={change.n_branch} "
                f"(Re(lambda') > 0)",
                file=sys.stderr,
            )

    if lmap.success_ratio < MIN_SUCCESS_RATIO:
        print(
            f"❌ Only {lmap.success_ratio:.0%} of Hopf points produced a coefficient",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def cmd_verify(analyzer: PllHopfAnalyzer) -> int:
    report = analyzer.verify()
    write_json(report, analyzer.config.output_path)
    if report["consistent"]:
        print(f"✅ Consistent: sign(a) = {report['sign_a']:+d}", file=sys.stderr)
        return EXIT_OK
    print(
        f"❌ Inconsistent: sign(a) = {report['sign_a']:+d}, "
        f"simulation says {report['empirical_sign']:+d}",
        file=sys.stderr,
    )
    return EXIT_INCONSISTENT


def _emit_trajectory(cfg: RunConfig, traj) -> None:
    if cfg.format == "json":
        write_json({"columns": traj.header(), "rows": traj.to_rows()}, cfg.output_path)
    else:
        write_csv(traj.header(), traj.to_rows(), cfg.output_path)


def cmd_simulate(analyzer: PllHopfAnalyzer) -> int:
    cfg = analyzer.config
    try:
        traj = analyzer.simulate()
    except DivergenceError as e:
        if e.trajectory is not None:
            _emit_trajectory(cfg, e.trajectory)
        print(f"❌ {type(e).__name__}: {e!s}", file=sys.stderr)
        return EXIT_DIVERGED
    _emit_trajectory(cfg, traj)
    return EXIT_OK


COMMANDS: dict[str, Callable[[PllHopfAnalyzer], int]] = {
    "equilibria": cmd_equilibria,
    "hopf": cmd_hopf,
    "lyapunov": cmd_lyapunov,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def main(argv=None):
    """Main CLI entry point."""
    args = parse_args(argv)

    try:
        cfg = build_run_config(config_path=args.config, config_dict=_overrides(args))
        analyzer = PllHopfAnalyzer(cfg, verbose=args.verbose)
        code = COMMANDS[args.command](analyzer)
    except (ConfigurationError, DomainError, DegeneracyError) as e:
        print(f"❌ {type(e).__name__}: {e!s}", file=sys.stderr)
        sys.exit(EXIT_INPUT)
    except PllHopfError as e:
        print(f"❌ {type(e).__name__}: {e!s}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)
    except Exception as e:
        print(f"❌ Unexpected error: {type(e).__name__}: {e!s}", file=sys.stderr)
        if args.verbose:
            import traceback

            traceback.print_exc()
        sys.exit(EXIT_FAILURE)

    sys.exit(code)


if __name__ == "__main__":
    main()
