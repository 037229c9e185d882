"""Command-line entry point: ``kerrbattery <command> ...``."""

from __future__ import annotations

import argparse
import sys
import warnings

from . import harness
from .errors import (
    ConfigError,
    DegenerateSteadyStateError,
    DimensionError,
    DivergenceError,
    InvalidStateError,
    RegimeWarning,
    StepSizeError,
    TruncationWarning,
)
from .meanfield import meanfield_evolve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_TAINTED = 3


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(path: str) -> tuple[harness.Scenario, str]:
    config = harness.load_config(path)
    output = config.pop("output", "-")
    return harness.scenario_from_config(config, label=path), output


def _write(result, output: str, plotdata: bool) -> None:
    if plotdata:
        harness.emit_plotdata(result, output)
    else:
        harness.emit_csv(result, output)


def _report(notes, tainted: bool) -> int:
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    if tainted:
        print("warning: run completed but is tainted (see diagnostics columns)", file=sys.stderr)
        return EXIT_TAINTED
    return EXIT_OK


def cmd_evolve(args) -> int:
    scenario, output = _load(args.config)
    output = args.output or output
    traj = harness.run_scenario(scenario, eig_diagnostics=not args.no_eig)
    _write(traj, output, args.plotdata)
    return _report(traj.notes, traj.tainted)


def cmd_sweep(args) -> int:
    scenario, output = _load(args.config)
    output = args.output or output
    u_values = args.u if args.u is not None else list(harness.DEFAULT_U_GRID)
    result = harness.sweep(
        scenario,
        u_values,
        args.gamma,
        args.f,
        workers=args.workers,
        eig_diagnostics=not args.no_eig,
    )
    _write(result, output, args.plotdata)
    for row in result.rows:
        if row.failed:
            print(f"row U={row.U:g} gamma={row.gamma:g} F={row.F:g} failed: {row.error}", file=sys.stderr)
    return _report(result.notes, result.tainted)


def cmd_meanfield(args) -> int:
    scenario, output = _load(args.config)
    output = args.output or output
    traj = meanfield_evolve(scenario.params, scenario.grid, rtol=scenario.rtol, atol=scenario.atol)
    _write(traj, output, args.plotdata)
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, _ = _load(args.config)
    report = harness.compare(scenario)
    print(f"max |E_B(full) - E_B(meanfield)| = {report.meanfield_max_dev:.6g}")
    if report.oracle_max_dev is None:
        print(report.note)
    else:
        print(f"max |rho(evolve) - rho(expm)|    = {report.oracle_max_dev:.6g}")
    return EXIT_OK


def cmd_preset(args) -> int:
    scenario = harness.preset(args.name, kind=args.kind, U=args.U)
    sys.stdout.write(harness.format_config(scenario))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrbattery",
        description="Driven-dissipative charger coupled to a Kerr battery: master-equation runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("config", help="key = value config file")
        p.add_argument("-o", "--output", help="output path ('-' for stdout); overrides the config")
        p.add_argument("--plotdata", action="store_true", help="whitespace-separated output for gnuplot")

    p = sub.add_parser("evolve", help="single trajectory to CSV")
    add_io(p)
    p.add_argument("--no-eig", action="store_true", help="skip the per-sample minimum-eigenvalue check")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="Cartesian sweep over U, gamma, F")
    add_io(p)
    p.add_argument("--u", type=_floats, help="U values (default 0,0.005,0.05,0.1,0.3)")
    p.add_argument("--gamma", type=_floats, help="gamma values (default: from config)")
    p.add_argument("--f", type=_floats, help="drive values (default: from config)")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${harness.WORKERS_ENV} or CPU count)")
    p.add_argument("--no-eig", action="store_true", help="skip the per-sample minimum-eigenvalue check")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("meanfield", help="mean-field trajectory to CSV")
    add_io(p)
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("compare", help="full vs mean-field vs exact-propagation deltas")
    p.add_argument("config")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("preset", help="print a figure preset as a config file")
    p.add_argument("name", choices=sorted(harness.PRESETS))
    p.add_argument("--kind", choices=harness.KINDS, default="kerr")
    p.add_argument("--U", type=float, default=0.0)
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", (TruncationWarning, RegimeWarning))
            return args.func(args)
    except (ConfigError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepSizeError, DivergenceError, InvalidStateError, DegenerateSteadyStateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
