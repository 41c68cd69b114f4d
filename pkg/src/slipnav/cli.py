"""Command-line entry point: ``slipnav {simulate,run,evaluate,toy-static}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical-health failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from .config import load_config, save_config
from .errors import DataError, NumericalHealthError, SlipNavError
from .evaluate import evaluate, write_report
from .io import read_imu, read_slip, read_trajectory, read_wheels, write_imu, write_slip, write_trajectory, \
    write_wheels
from .pipeline import config_for_scenario, run_comparators, run_filter, run_toy_static
from .sim import BUILTIN_SCENARIOS, ScenarioSpec, scenario_from_dict, scenario_to_dict, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_HEALTH = 0, 1, 2, 3

# estimator name in the report -> file name in a run directory
ESTIMATE_FILES = {"proposed": "proposed.csv", "direct": "direct.csv", "wheel_odometry": "wo.csv"}

log = logging.getLogger("slipnav")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slipnav", description="IMU/wheel-odometry navigation with slip detection.")
    p.add_argument("--seed", type=int, default=None, help="random seed for simulation (default: scenario seed)")
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="synthesize a scenario")
    s.add_argument("scenario", help=f"built-in name ({', '.join(BUILTIN_SCENARIOS)}) or scenario YAML file")
    s.add_argument("-o", "--out", required=True, type=Path)

    r = sub.add_parser("run", help="run the filter and both baselines")
    r.add_argument("config", type=Path)
    r.add_argument("--imu", required=True, type=Path)
    r.add_argument("--wheels", required=True, type=Path)
    r.add_argument("-o", "--out", type=Path, default=None, help="output directory (default: config output_dir)")

    e = sub.add_parser("evaluate", help="score a run directory against truth")
    e.add_argument("config", type=Path)
    e.add_argument("--est", required=True, type=Path, help="run directory")
    e.add_argument("--truth", required=True, type=Path)
    e.add_argument("-o", "--out", required=True, type=Path, help="report JSON path")

    t = sub.add_parser("toy-static", help="static INS / ZU / ZU+NH comparison")
    t.add_argument("-o", "--out", required=True, type=Path)
    return p


def _load_scenario(name: str, seed: int | None) -> ScenarioSpec:
    if name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name](0 if seed is None else seed)
    path = Path(name)
    if not path.is_file():
        raise DataError(f"scenario not found: {name} (not a built-in and no such file)")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a mapping")
    spec = scenario_from_dict(data)
    return spec if seed is None else spec.with_seed(seed)


def cmd_simulate(args) -> int:
    spec = _load_scenario(args.scenario, args.seed)
    truth, imu, wheels = simulate(spec)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_imu(out / "imu.csv", imu)
    write_wheels(out / "wheels.csv", wheels)
    write_trajectory(out / "truth.csv", truth.trajectory())
    (out / "scenario.yaml").write_text(yaml.safe_dump(scenario_to_dict(spec), sort_keys=False), encoding="utf-8")
    save_config(config_for_scenario(spec), out / "config.yaml")
    print(f"simulated {spec.duration:.1f} s: {len(imu)} IMU and {len(wheels)} wheel samples -> {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    imu = read_imu(args.imu)
    wheels = read_wheels(args.wheels)
    if len(imu) < 2:
        raise DataError(f"{args.imu}: need at least two IMU samples")
    if not wheels:
        raise DataError(f"{args.wheels}: no wheel samples")
    if args.out is None and cfg.output_dir is None:
        raise DataError("no output directory: pass -o or set output_dir in the config")
    out: Path = Path(cfg.output_dir) if args.out is None else args.out
    out.mkdir(parents=True, exist_ok=True)
    run = run_filter(cfg, imu, wheels)
    comp = run_comparators(cfg, imu, wheels)
    write_trajectory(out / ESTIMATE_FILES["proposed"], run.trajectory)
    write_trajectory(out / ESTIMATE_FILES["direct"], comp.direct)
    write_trajectory(out / ESTIMATE_FILES["wheel_odometry"], comp.wheel_odometry)
    write_slip(out / "slip.csv", run.slip)
    stats = {
        "runtime_s": run.runtime_s,
        "imu_samples": len(imu),
        "wheel_samples": len(wheels),
        "updates": run.counts,
        "health": run.health.to_dict(),
        "accel_bias_m_s2": run.b_a.tolist(),
        "gyro_bias_rad_s": run.b_g.tolist(),
    }
    (out / "run_stats.json").write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    print(f"filtered {len(imu)} epochs in {run.runtime_s:.2f} s; updates {run.counts} -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    truth = read_trajectory(args.truth)
    if not args.est.is_dir():
        raise DataError(f"run directory not found: {args.est}")
    estimates = {name: read_trajectory(args.est / fn) for name, fn in ESTIMATE_FILES.items()
                 if (args.est / fn).is_file()}
    if not estimates:
        raise DataError(f"{args.est}: no estimate files ({', '.join(ESTIMATE_FILES.values())})")
    slip_path = args.est / "slip.csv"
    slip = read_slip(slip_path) if slip_path.is_file() else []
    stats_path = args.est / "run_stats.json"
    runtime, health = {}, {}
    if stats_path.is_file():
        try:
            stats = json.loads(stats_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{stats_path}: {exc}") from exc
        runtime = {k: stats[k] for k in ("runtime_s", "imu_samples", "wheel_samples") if k in stats}
        health = stats.get("health", {})
    report = evaluate(estimates, truth, slip, cfg.model, runtime, health, cfg.slip_no_slip_band,
                      cfg.slip_near_zero_m_s)
    write_report(report, args.out, args.out.parent)
    for name, sc in report.estimators.items():
        e, n, u = sc.rmse
        print(f"{name}: RMSE E/N/U {e:.3f}/{n:.3f}/{u:.3f} m, final heading error {sc.final_heading_error_deg:.3f} deg")
    slip_sec = report.slip_section()
    if slip_sec is not None:
        print(f"slip: accuracy {100.0 * slip_sec['accuracy']:.1f}% over {slip_sec['n_records']} records")
    return EXIT_OK


def cmd_toy_static(args) -> int:
    res = run_toy_static(0 if args.seed is None else args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    doc = {
        "seed": res.seed,
        "final_position_error_m": res.errors,
        "ratio_zunh_to_ins": res.ratio,
        "verdict": res.verdict(),
        "passed": res.passed,
        "runtime_s": res.runtime_s,
        "health": {k: h.to_dict() for k, h in res.health.items()},
    }
    (args.out / "toy_static.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    for mode, err in res.errors.items():
        print(f"{mode}: {err:.4f} m")
    print(res.verdict())
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "run": cmd_run, "evaluate": cmd_evaluate, "toy-static": cmd_toy_static}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalHealthError as exc:
        print(f"numerical health failure: {exc}", file=sys.stderr)
        return EXIT_HEALTH
    except SlipNavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
