"""CSV readers and writers for sensor streams, trajectories and slip logs.

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .mechanization import ImuSample
from .slip import SlipClass, SlipRecord, WheelSample

IMU_COLUMNS = ("t", "fx", "fy", "fz", "wx", "wy", "wz")
WHEEL_COLUMNS = ("t", "w_fl", "w_fr", "w_rl", "w_rr")
TRAJECTORY_COLUMNS = ("t", "lat_deg", "lon_deg", "h", "vn", "ve", "vd", "roll_deg", "pitch_deg", "yaw_deg")
SLIP_COLUMNS = ("t", "s", "class", "v_x", "r_omega", "s_truth", "class_truth")

MAX_SPECIFIC_FORCE = 50.0  # m/s^2, unit sanity bound


@dataclass
class Trajectory:
    """Navigation solution (or truth) sampled at a series of epochs.

    Angles are radians; ``yaw`` is unwrapped.
    """

    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    h: np.ndarray
    v: np.ndarray  # (N, 3) NED
    roll: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __post_init__(self):
        n = len(self.t)
        for name in ("lat", "lon", "h", "roll", "pitch", "yaw"):
            if len(getattr(self, name)) != n:
                raise DataError(f"trajectory column {name} has the wrong length")
        if np.shape(self.v) != (n, 3):
            raise DataError("trajectory velocity must be N x 3")


def _read_rows(path: str | Path, columns: Sequence[str]) -> list[tuple[int, list[float]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != tuple(columns):
            raise DataError(f"{path}:1: expected header {','.join(columns)}, got {','.join(header or [])}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                raise DataError(f"{path}:{line}: expected {len(columns)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}:{line}: non-numeric field in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{line}: non-finite value")
            rows.append((line, vals))
    return rows


def _check_monotonic(path, rows) -> None:
    for (_, prev), (line, cur) in zip(rows, rows[1:]):
        if not cur[0] > prev[0]:
            raise DataError(f"{path}:{line}: non-monotonic timestamp {cur[0]!r} after {prev[0]!r}")


def find_gaps(times: Sequence[float], max_step: float) -> list[tuple[float, float]]:
    """(t_before, t_after) pairs whose spacing exceeds ``max_step``."""
    t = np.asarray(times, dtype=float)
    idx = np.nonzero(np.diff(t) > max_step)[0]
    return [(float(t[i]), float(t[i + 1])) for i in idx]


def read_imu(path: str | Path) -> list[ImuSample]:
    rows = _read_rows(path, IMU_COLUMNS)
    _check_monotonic(path, rows)
    out = []
    for line, v in rows:
        f = np.array(v[1:4])
        if float(np.linalg.norm(f)) > MAX_SPECIFIC_FORCE:
            raise DataError(f"{path}:{line}: specific force {np.linalg.norm(f):.1f} m/s^2 fails the unit check")
        out.append(ImuSample(v[0], f, np.array(v[4:7])))
    return out


def read_wheels(path: str | Path) -> list[WheelSample]:
    rows = _read_rows(path, WHEEL_COLUMNS)
    _check_monotonic(path, rows)
    return [WheelSample(v[0], tuple(v[1:5])) for _, v in rows]


def _write(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if x is None else (repr(float(x)) if isinstance(x, (float, np.floating)) else x)
                        for x in r])


def write_imu(path: str | Path, samples: Iterable[ImuSample]) -> None:
    _write(path, IMU_COLUMNS, ([s.t, *map(float, s.f_ib_b), *map(float, s.w_ib_b)] for s in samples))


def write_wheels(path: str | Path, samples: Iterable[WheelSample]) -> None:
    _write(path, WHEEL_COLUMNS, ([s.t, *map(float, s.rates)] for s in samples))


def write_trajectory(path: str | Path, traj: Trajectory) -> None:
    deg = np.degrees
    cols = [traj.t, deg(traj.lat), deg(traj.lon), traj.h, traj.v[:, 0], traj.v[:, 1], traj.v[:, 2],
            deg(traj.roll), deg(traj.pitch), deg(traj.yaw)]
    _write(path, TRAJECTORY_COLUMNS, (list(map(float, r)) for r in zip(*cols)))


def read_trajectory(path: str | Path) -> Trajectory:
    rows = _read_rows(path, TRAJECTORY_COLUMNS)
    _check_monotonic(path, rows)
    if not rows:
        raise DataError(f"{path}: no trajectory rows")
    a = np.array([v for _, v in rows])
    rad = np.radians
    return Trajectory(a[:, 0], rad(a[:, 1]), rad(a[:, 2]), a[:, 3], a[:, 4:7].copy(), rad(a[:, 7]), rad(a[:, 8]),
                      np.unwrap(rad(a[:, 9])))


def write_slip(path: str | Path, records: Iterable[SlipRecord]) -> None:
    def row(r: SlipRecord):
        return [r.t, r.s, r.cls.name, r.v_x, r.r_omega, r.s_truth,
                None if r.class_truth is None else r.class_truth.name]

    _write(path, SLIP_COLUMNS, (row(r) for r in records))


def read_slip(path: str | Path) -> list[SlipRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SLIP_COLUMNS:
            raise DataError(f"{path}:1: expected header {','.join(SLIP_COLUMNS)}")
        for row in reader:
            try:
                s_truth = float(row["s_truth"]) if row["s_truth"] else None
                cls_truth = SlipClass[row["class_truth"]] if row["class_truth"] else None
                out.append(SlipRecord(float(row["t"]), float(row["s"]), SlipClass[row["class"]], float(row["v_x"]),
                                      float(row["r_omega"]), s_truth, cls_truth))
            except (KeyError, ValueError):
                raise DataError(f"{path}:{reader.line_num}: malformed slip record") from None
    return out
