"""Longitudinal slip ratio, five-class slip classification and confusion-matrix scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .mechanization import NavState
from .pseudo import VehicleGeometry

NEAR_ZERO_SPEED = 0.01  # m/s
NO_SLIP_BAND = 0.01


class SlipClass(IntEnum):
    NoSlip = 0
    Low = 1
    Medium = 2
    High = 3
    Extreme = 4


# upper bounds of |s| for Low, Medium, High (inclusive); Extreme covers the rest
CLASS_BOUNDS = (0.2, 0.4, 0.7)


@dataclass(frozen=True)
class WheelSample:
    t: float
    rates: tuple[float, float, float, float]  # fl, fr, rl, rr in rad/s

    @property
    def left(self) -> float:
        return 0.5 * (self.rates[0] + self.rates[2])

    @property
    def right(self) -> float:
        return 0.5 * (self.rates[1] + self.rates[3])


@dataclass(frozen=True)
class SlipRecord:
    t: float
    s: float
    cls: SlipClass
    v_x: float
    r_omega: float
    s_truth: float | None = None
    class_truth: SlipClass | None = None


def body_velocity(nav: NavState) -> np.ndarray:
    """Velocity resolved in the body frame; element 0 is the longitudinal speed."""
    return nav.C_b_n.T @ nav.v_eb_n


def wheel_speed(ws: WheelSample, geom: VehicleGeometry) -> tuple[float, float]:
    """Mean wheel rate (rad/s) and the corresponding rolling speed r*omega (m/s)."""
    omega = float(np.mean(ws.rates))
    return omega, geom.wheel_radius * omega


def slip_ratio(v_x: float, r_omega: float, near_zero: float = NEAR_ZERO_SPEED) -> float:
    """Slip ratio in [-1, 1]; positive when the wheels turn faster than the body moves.

    Speeds with magnitude below ``near_zero`` are treated as exactly zero. Reverse
    driving is handled by mirroring both speeds.
    """
    if abs(v_x) < near_zero:
        v_x = 0.0
    if abs(r_omega) < near_zero:
        r_omega = 0.0
    if r_omega < 0.0 or (r_omega == 0.0 and v_x < 0.0):
        v_x, r_omega = -v_x, -r_omega
    if v_x == r_omega:
        return 0.0
    if r_omega != 0.0 and v_x < r_omega:
        s = 1.0 - v_x / r_omega
    else:
        s = r_omega / v_x - 1.0
    return min(1.0, max(-1.0, s))


def truth_slip(v_x_truth: float, r_omega: float, near_zero: float = NEAR_ZERO_SPEED) -> float:
    return slip_ratio(v_x_truth, r_omega, near_zero)


def classify(s: float, no_slip_band: float = NO_SLIP_BAND) -> SlipClass:
    a = abs(s)
    if a <= no_slip_band:
        return SlipClass.NoSlip
    for cls, bound in zip((SlipClass.Low, SlipClass.Medium, SlipClass.High), CLASS_BOUNDS):
        if a <= bound:
            return cls
    return SlipClass.Extreme


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-normalised confusion matrix: rows are estimated classes, columns truth classes."""

    percent: np.ndarray  # 5 x 5, NaN columns where a truth class is empty
    counts: np.ndarray  # per truth class
    raw: np.ndarray  # 5 x 5 integer counts

    @property
    def accuracy(self) -> float:
        """Fraction of records (over non-empty truth classes) whose class was estimated correctly."""
        total = self.counts.sum()
        return float(np.trace(self.raw) / total) if total else float("nan")

    def column(self, cls: SlipClass) -> np.ndarray:
        return self.percent[:, int(cls)]


def confusion_matrix(records: Iterable[SlipRecord]) -> ConfusionMatrix:
    raw = np.zeros((5, 5), dtype=int)
    for r in records:
        if r.class_truth is None:
            raise ValueError(f"record at t={r.t} has no truth class")
        raw[int(r.cls), int(r.class_truth)] += 1
    counts = raw.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        percent = np.where(counts > 0, 100.0 * raw / np.where(counts > 0, counts, 1), np.nan)
    return ConfusionMatrix(percent, counts, raw)


def weighted_accuracy(diagonal_percent: Sequence[float], counts: Sequence[int]) -> float:
    """Count-weighted mean of per-class detection rates, as a fraction."""
    d = np.asarray(diagonal_percent, dtype=float)
    c = np.asarray(counts, dtype=float)
    keep = c > 0
    return float(np.sum(d[keep] * c[keep]) / (100.0 * np.sum(c[keep])))


def make_record(t: float, nav: NavState, ws: WheelSample, geom: VehicleGeometry,
                no_slip_band: float = NO_SLIP_BAND, near_zero: float = NEAR_ZERO_SPEED) -> SlipRecord:
    v_x = float(body_velocity(nav)[0])
    _, r_omega = wheel_speed(ws, geom)
    s = slip_ratio(v_x, r_omega, near_zero)
    return SlipRecord(t, s, classify(s, no_slip_band), v_x, r_omega)


def with_truth(rec: SlipRecord, v_x_truth: float, no_slip_band: float = NO_SLIP_BAND,
               near_zero: float = NEAR_ZERO_SPEED) -> SlipRecord:
    s_tr = truth_slip(v_x_truth, rec.r_omega, near_zero)
    return SlipRecord(rec.t, rec.s, rec.cls, rec.v_x, rec.r_omega, s_tr, classify(s_tr, no_slip_band))


def is_valid_slip(s: float) -> bool:
    return math.isfinite(s) and -1.0 <= s <= 1.0
