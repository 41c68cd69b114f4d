"""Scoring of estimated trajectories and slip logs against truth.

Produces a JSON-serialisable report (see :data:`REPORT_SCHEMA`) plus per-series
CSV files for plotting elsewhere.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .geo import WGS84, EllipsoidModel, Euler, GeoPosition, enu_from_geodetic, euler_to_dcm
from .io import Trajectory
from .slip import SlipClass, SlipRecord, confusion_matrix, with_truth

VELOCITY_BIN_EDGES = np.linspace(-0.5, 0.5, 41)  # m/s; outliers land in the end bins


@dataclass
class EstimatorScore:
    name: str
    t: np.ndarray
    enu_error: np.ndarray  # (N, 3) estimate minus truth, metres
    heading_error: np.ndarray  # rad, unwrapped
    velocity_error: np.ndarray  # (N, 3) NED

    @property
    def rmse(self) -> np.ndarray:
        return np.sqrt(np.mean(self.enu_error**2, axis=0))

    @property
    def final_heading_error_deg(self) -> float:
        return math.degrees(float(self.heading_error[-1]))

    @property
    def final_position_error(self) -> float:
        return float(np.linalg.norm(self.enu_error[-1]))

    def velocity_histogram(self, edges: np.ndarray = VELOCITY_BIN_EDGES) -> dict[str, list[int]]:
        lo, hi = edges[0], edges[-1]
        out = {}
        for i, axis in enumerate(("north", "east", "down")):
            x = np.clip(self.velocity_error[:, i], lo, hi)
            out[axis] = np.histogram(x, bins=edges)[0].astype(int).tolist()
        return out

    def to_dict(self) -> dict:
        e, n, u = self.rmse
        return {
            "n_samples": int(len(self.t)),
            "rmse_enu_m": {"east": float(e), "north": float(n), "up": float(u)},
            "final_position_error_m": self.final_position_error,
            "final_heading_error_deg": self.final_heading_error_deg,
            "velocity_error_histogram": {"edges": VELOCITY_BIN_EDGES.tolist(), **self.velocity_histogram()},
        }


@dataclass
class EvaluationReport:
    estimators: dict[str, EstimatorScore]
    slip_records: list[SlipRecord] = field(default_factory=list)
    runtime: dict = field(default_factory=dict)
    health: dict = field(default_factory=dict)

    def slip_section(self) -> dict | None:
        if not self.slip_records:
            return None
        cm = confusion_matrix(self.slip_records)
        pct = [[None if math.isnan(x) else float(x) for x in row] for row in cm.percent]
        return {
            "classes": [c.name for c in SlipClass],
            "rows": "estimated class",
            "columns": "truth class",
            "percent": pct,
            "counts": cm.counts.astype(int).tolist(),
            "accuracy": cm.accuracy,
            "n_records": int(cm.counts.sum()),
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
            "slip": self.slip_section(),
            "runtime": dict(self.runtime),
            "health": dict(self.health),
        }


def interpolate_trajectory(traj: Trajectory, t: np.ndarray) -> Trajectory:
    """Linear interpolation of every channel; yaw is interpolated unwrapped."""
    t = np.asarray(t, dtype=float)
    if len(traj) < 2:
        raise DataError("truth needs at least two epochs for interpolation")
    yaw = np.unwrap(traj.yaw)

    def f(x):
        return np.interp(t, traj.t, x)

    v = np.column_stack([f(traj.v[:, i]) for i in range(3)])
    return Trajectory(t, f(traj.lat), f(traj.lon), f(traj.h), v, f(traj.roll), f(traj.pitch), f(yaw))


def _overlap(est: Trajectory, truth: Trajectory) -> np.ndarray:
    sel = (est.t >= truth.t[0] - 1e-9) & (est.t <= truth.t[-1] + 1e-9)
    if not np.any(sel):
        raise DataError("estimate and truth do not overlap in time")
    return sel


def _subset(traj: Trajectory, sel: np.ndarray) -> Trajectory:
    return Trajectory(traj.t[sel], traj.lat[sel], traj.lon[sel], traj.h[sel], traj.v[sel], traj.roll[sel],
                      traj.pitch[sel], traj.yaw[sel])


def unwrapped_heading_error(est_yaw: np.ndarray, truth_yaw: np.ndarray) -> np.ndarray:
    """Estimate minus truth heading with both series unwrapped; starts inside (-pi, pi]."""
    d = np.unwrap(est_yaw) - np.unwrap(truth_yaw)
    offset = 2.0 * math.pi * math.floor((d[0] + math.pi) / (2.0 * math.pi))
    return d - offset


def score(name: str, est: Trajectory, truth: Trajectory, model: EllipsoidModel = WGS84) -> EstimatorScore:
    """Errors of one estimator; truth is interpolated to the estimate epochs."""
    sel = _overlap(est, truth)
    est = _subset(est, sel)
    ref = interpolate_trajectory(truth, est.t)
    origin = GeoPosition(float(truth.lat[0]), float(truth.lon[0]), float(truth.h[0]))
    enu_est = enu_from_geodetic(est.lat, est.lon, est.h, origin, model)
    enu_ref = enu_from_geodetic(ref.lat, ref.lon, ref.h, origin, model)
    return EstimatorScore(name, est.t, enu_est - enu_ref, unwrapped_heading_error(est.yaw, ref.yaw), est.v - ref.v)


def truth_longitudinal_speed(truth: Trajectory, t) -> np.ndarray:
    """Body-frame forward speed of the truth at times ``t``."""
    ref = interpolate_trajectory(truth, np.atleast_1d(t))
    out = np.empty(len(ref))
    for k in range(len(ref)):
        C = euler_to_dcm(Euler(ref.roll[k], ref.pitch[k], ref.yaw[k]))
        out[k] = (C.T @ ref.v[k])[0]
    return out


def attach_truth(records: Sequence[SlipRecord], truth: Trajectory, no_slip_band: float | None = None,
                 near_zero: float | None = None) -> list[SlipRecord]:
    if not records:
        return []
    ts = np.array([r.t for r in records])
    sel = (ts >= truth.t[0] - 1e-9) & (ts <= truth.t[-1] + 1e-9)
    kept = [r for r, keep in zip(records, sel) if keep]
    vx = truth_longitudinal_speed(truth, ts[sel]) if kept else []
    kw = {}
    if no_slip_band is not None:
        kw["no_slip_band"] = no_slip_band
    if near_zero is not None:
        kw["near_zero"] = near_zero
    return [with_truth(r, float(v), **kw) for r, v in zip(kept, vx)]


def evaluate(estimates: Mapping[str, Trajectory], truth: Trajectory, slip_records: Sequence[SlipRecord] = (),
             model: EllipsoidModel = WGS84, runtime: Mapping | None = None, health: Mapping | None = None,
             no_slip_band: float | None = None, near_zero: float | None = None) -> EvaluationReport:
    """Score every estimator identically and build the confusion matrix of the slip log."""
    if not estimates:
        raise DataError("nothing to evaluate")
    scores = {name: score(name, est, truth, model) for name, est in estimates.items()}
    recs = list(slip_records)
    if recs and any(r.class_truth is None for r in recs):
        recs = attach_truth(recs, truth, no_slip_band, near_zero)
    return EvaluationReport(scores, recs, dict(runtime or {}), dict(health or {}))


def write_report(report: EvaluationReport, path: str | Path, series_dir: str | Path | None = None) -> None:
    """Write the JSON report and, optionally, per-estimator error series as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    if series_dir is None:
        return
    series_dir = Path(series_dir)
    series_dir.mkdir(parents=True, exist_ok=True)
    for name, s in report.estimators.items():
        with (series_dir / f"errors_{name}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "east", "north", "up", "heading_deg", "vn", "ve", "vd"])
            for k in range(len(s.t)):
                w.writerow([repr(float(x)) for x in (s.t[k], *s.enu_error[k], math.degrees(s.heading_error[k]),
                                                     *s.velocity_error[k])])


_NUM = {"type": "number"}
_COUNTS = {"type": "array", "items": {"type": "integer", "minimum": 0}}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "estimators", "slip", "runtime", "health"],
    "properties": {
        "schema_version": {"const": 1},
        "estimators": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["n_samples", "rmse_enu_m", "final_position_error_m", "final_heading_error_deg",
                             "velocity_error_histogram"],
                "properties": {
                    "n_samples": {"type": "integer", "minimum": 1},
                    "rmse_enu_m": {
                        "type": "object",
                        "required": ["east", "north", "up"],
                        "properties": {k: {"type": "number", "minimum": 0} for k in ("east", "north", "up")},
                    },
                    "final_position_error_m": {"type": "number", "minimum": 0},
                    "final_heading_error_deg": _NUM,
                    "velocity_error_histogram": {
                        "type": "object",
                        "required": ["edges", "north", "east", "down"],
                        "properties": {"edges": {"type": "array", "items": _NUM, "minItems": 2},
                                       "north": _COUNTS, "east": _COUNTS, "down": _COUNTS},
                    },
                },
            },
        },
        "slip": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["classes", "percent", "counts", "accuracy", "n_records"],
                    "properties": {
                        "classes": {"type": "array", "items": {"type": "string"}, "minItems": 5, "maxItems": 5},
                        "percent": {"type": "array", "minItems": 5, "maxItems": 5,
                                    "items": {"type": "array", "minItems": 5, "maxItems": 5,
                                              "items": {"type": ["number", "null"], "minimum": 0,
                                                        "maximum": 100}}},
                        "counts": {**_COUNTS, "minItems": 5, "maxItems": 5},
                        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                        "n_records": {"type": "integer", "minimum": 0},
                    },
                },
            ]
        },
        "runtime": {"type": "object"},
        "health": {"type": "object"},
    },
}
