"""Command-line interface.

Subcommands: ``run``, ``compare``, ``identify`` take a scenario config
file; ``roads`` exports a road profile as CSV; ``metrics`` evaluates ride
metrics on a trace column. Exit codes: 0 success, 1 usage error,
2 runtime error. The ``RD_SEED`` environment variable overrides the
config seed; ``--seed`` overrides both.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, ride
from .roads import KINDS, RoadProfile

_ROAD_DURATIONS = {"bump": 0.5, "ramp": 3.0, "sine": 4.0}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="suspsim", description=__doc__)
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--out-dir", type=Path, default=Path("."),
                        help="directory for exported files")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress stdout reporting")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "compare", "identify"):
        s = sub.add_parser(name)
        s.add_argument("scenario", type=Path, help="scenario config file")

    s = sub.add_parser("roads")
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--h", type=float, default=0.04, help="peak elevation [m]")
    s.add_argument("--time-scale", type=float, default=1.0)
    s.add_argument("--duration", type=float, default=None)
    s.add_argument("--out", type=Path, default=None)

    s = sub.add_parser("metrics")
    s.add_argument("--in", dest="infile", type=Path, required=True)
    s.add_argument("--col", required=True, help="CSV column to evaluate")
    return parser


def _load_config(args) -> harness.ScenarioConfig:
    cfg = harness.ScenarioConfig.from_file(args.scenario)
    seed = cfg.seed
    if "RD_SEED" in os.environ:
        seed = int(os.environ["RD_SEED"])
    if args.seed is not None:
        seed = args.seed
    return replace(cfg, seed=seed)


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    try:
        trace = harness.run_scenario(cfg)
    except harness.ScenarioAbort as exc:
        path = args.out_dir / "trace_aborted.csv"
        harness.export_csv(exc.trace, path)
        sys.stderr.write(f"aborted: {exc}; partial trace in {path}\n")
        return 2
    path = args.out_dir / f"trace_{cfg.mode}.csv"
    harness.export_csv(trace, path)
    metrics = harness.post_engagement_metrics(trace, cfg.dt)
    _say(args, f"trace written to {path}")
    _say(args, f"weighted RMS body accel: {metrics.a_rms:.6f} m/s^2 "
               f"({'; '.join(sorted(metrics.labels))})")
    return 0


def _cmd_compare(args) -> int:
    cfg = _load_config(args)
    report, passive_trace, active_trace = harness.run_comparison(cfg)
    harness.export_csv(passive_trace, args.out_dir / "trace_passive.csv")
    harness.export_csv(active_trace, args.out_dir / "trace_active.csv")
    (args.out_dir / "report.txt").write_text(report.to_text())
    (args.out_dir / "metrics.csv").write_text(report.to_csv())
    _say(args, report.to_text())
    _say(args, f"report written to {args.out_dir / 'report.txt'}")
    return 0


def _cmd_identify(args) -> int:
    cfg = replace(_load_config(args), mode="identification")
    trace = harness.run_scenario(cfg)
    path = args.out_dir / "trace_identification.csv"
    harness.export_csv(trace, path)
    _say(args, f"identification trace written to {path}")
    return 0


def _cmd_roads(args) -> int:
    duration = args.duration or _ROAD_DURATIONS[args.kind]
    road = RoadProfile(kind=args.kind, peak=args.h, time_scale=args.time_scale)
    dt = 1e-3
    n = int(round(duration / dt))
    path = args.out or (args.out_dir / f"road_{args.kind}.csv")
    with open(path, "w", newline="") as fh:
        fh.write("t_s,road_m\n")
        for i in range(n + 1):
            t = i * dt
            fh.write(f"{t:.17g},{road.height(t):.17g}\n")
    _say(args, f"road profile written to {path}")
    return 0


def _cmd_metrics(args) -> int:
    trace = harness.import_csv(args.infile)
    if args.col not in trace.data:
        raise KeyError(f"column {args.col!r} not in {args.infile}")
    t = trace.data.get("t_s")
    dt = float(t[1] - t[0]) if t is not None and len(t) > 1 else 1e-3
    metrics = ride.RideMetrics.from_series(trace.data[args.col], dt)
    _say(args, f"weighted RMS: {metrics.a_rms:.6f} m/s^2")
    _say(args, f"peak weighted: {metrics.peak:.6f} m/s^2")
    _say(args, f"comfort: {'; '.join(sorted(metrics.labels))}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "identify": _cmd_identify,
    "roads": _cmd_roads,
    "metrics": _cmd_metrics,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](args)
    except harness.ScenarioAbort:
        raise  # handled inside the command
    except Exception as exc:  # runtime failures map to exit 2
        sys.stderr.write(f"suspsim: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
