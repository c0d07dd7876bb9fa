"""Command-line front end: ``manipgp plan | benchmark | gradcheck``.

Exit codes: 0 success, 1 convergence or gradient-check failure, 2 usage or
configuration error. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .gradcheck import run_gradcheck
from .kinematics import ModelError, load_model
from .pipeline import benchmark, plan
from .scenario import (
    ConfigError,
    dump_json,
    load_scenario,
    resolve_data_path,
    trajectory_profile,
    write_trajectory_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("manipgp")


def _setup_logging() -> None:
    level = os.environ.get("MANIP_LOG", "WARNING").strip().upper()
    value = int(level) if level.isdigit() else getattr(logging, level, None)
    if not isinstance(value, int):
        value = logging.WARNING
    logging.basicConfig(level=value, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _error(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def _out_dir(path: str | None) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_plan(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.sample_hz is not None:
        if not args.sample_hz > 0:
            raise ConfigError("--sample-hz must be positive")
        cfg.sample_hz = args.sample_hz
    res = plan(cfg)
    out = _out_dir(args.out)
    model = res.graph.model
    t, X, m = trajectory_profile(model, res.trajectory, 1.0 / cfg.sample_hz)
    write_trajectory_csv(out / "trajectory.csv", t, X, m)
    metrics = {
        "scenario": cfg.name,
        "final": res.metrics.to_dict(),
        "initial": res.init_metrics.to_dict(),
        "smoothness": res.smoothness,
        "sample_hz": cfg.sample_hz,
    }
    dump_json(metrics, out / "metrics.json")
    dump_json({**res.report.to_dict(), "costs_by_group": res.graph.costs_by_group(res.trajectory.states)},
              out / "report.json")
    print(json.dumps({"scenario": cfg.name, "status": res.report.status, "solved": res.metrics.solved,
                      "manip_avg": res.metrics.manip["avg"], "init_manip_avg": res.init_metrics.manip["avg"],
                      "out": str(out)}))
    if not res.metrics.solved:
        return _error("convergence", f"solver stopped with status {res.report.status}", EXIT_FAIL,
                      status=res.report.status)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    report, runs, timings = benchmark(cfg, args.runs, args.jobs)
    out = _out_dir(args.out)
    dump_json({"report": report, "runs": runs}, out / "benchmark.json")
    dump_json(timings, out / "timings.json")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    path = resolve_data_path(args.robot, "robots", ".")
    if not path.exists():
        raise ConfigError(f"robot file not found: {args.robot}")
    model = load_model(path)
    report = run_gradcheck(model, args.samples, args.seed, name=path.stem)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if not report.ok:
        bad = {c.name: c.worst_q for c in report.checks if not c.ok}
        return _error("gradcheck", "analytic and numerical derivatives disagree", EXIT_FAIL, configurations=bad)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="manipgp", description="Manipulability-aware GP trajectory planning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve one scenario and write trajectory.csv, metrics.json, report.json")
    sp.add_argument("scenario", help="scenario JSON path or bundled name such as scenario_va")
    sp.add_argument("--out", default=None, help="output directory (default: current directory)")
    sp.add_argument("--sample-hz", type=float, default=None, help="CSV sampling rate, overrides the scenario")
    sp.set_defaults(func=cmd_plan)

    sb = sub.add_parser("benchmark", help="randomized reaching benchmark with baselines")
    sb.add_argument("scenario")
    sb.add_argument("--runs", type=int, default=None, help="number of random starts (default: scenario value)")
    sb.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sb.add_argument("--out", default=None)
    sb.set_defaults(func=cmd_benchmark)

    sg = sub.add_parser("gradcheck", help="compare analytic derivatives with finite differences")
    sg.add_argument("robot", help="robot JSON path or bundled name such as planar_2r")
    sg.add_argument("--samples", type=int, default=100)
    sg.add_argument("--seed", type=int, default=0)
    sg.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except ModelError as exc:
        return _error("model", str(exc), EXIT_CONFIG)
    except RuntimeError as exc:
        return _error("runtime", str(exc), EXIT_FAIL)


if __name__ == "__main__":
    sys.exit(main())
