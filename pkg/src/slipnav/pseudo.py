"""Pseudo-measurements (ZUPT, ZARU, non-holonomic constraints) and stationarity detection."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .eskf import BG, N_STATES, VEL, ErrorFilterState
from .geo import WGS84, EllipsoidModel, cross3, earth_rate_nav, transport_rate
from .mechanization import ImuSample, NavState

_ROWS_YZ = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

_H_ZUPT = np.zeros((3, N_STATES))
_H_ZUPT[:, VEL] = -np.eye(3)
_H_ZUPT.flags.writeable = False

_H_ZARU = np.zeros((3, N_STATES))
_H_ZARU[:, BG] = -np.eye(3)
_H_ZARU.flags.writeable = False


@dataclass(frozen=True)
class VehicleGeometry:
    """Skid-steer platform geometry.

    The default lever arm has no longitudinal component: the IMU sits midway
    between the axles, so yaw rate induces no lateral velocity at the wheel frame.
    """

    wheel_radius: float = 0.12
    track_width: float = 0.685
    wheelbase: float = 0.544
    lever_arm: tuple[float, float, float] = (0.0, 0.3425, 0.0)

    def __post_init__(self):
        if self.wheel_radius <= 0:
            raise ValueError("wheel_radius must be positive")
        if self.track_width <= 0:
            raise ValueError("track_width must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    window_length: float = 0.5  # s
    omega_stop: float = 0.05  # rad/s, wheel rate
    sigma_a: float = 0.005  # m/s^2, accel-magnitude std
    sigma_g: float = 0.005  # rad/s, yaw-rate std
    wo_yaw_rate_max: float = 0.01  # rad/s
    hysteresis: int = 2
    min_samples: int = 5


@dataclass(frozen=True)
class StationarityVerdict:
    is_zero_velocity: bool
    is_zero_angular_rate: bool
    yaw_rate_std: float = float("nan")
    encoder_speed: float = float("nan")
    accel_std: float = float("nan")
    n_samples: int = 0
    reason: str = ""


def zupt_measurement(nav: NavState) -> tuple[np.ndarray, np.ndarray]:
    return -np.asarray(nav.v_eb_n, dtype=float), _H_ZUPT.copy()


def zaru_measurement(imu: ImuSample, efs: ErrorFilterState, nav: NavState | None = None,
                     model: EllipsoidModel = WGS84) -> tuple[np.ndarray, np.ndarray]:
    """Zero angular-rate innovation from the bias-compensated gyro output.

    When ``nav`` is given, the rotation of the navigation frame (Earth rate plus
    transport rate) is removed first so a stationary vehicle measures zero.
    """
    w = imu.w_ib_b - efs.b_g
    if nav is not None:
        w_in = earth_rate_nav(nav.p.lat, model) + transport_rate(nav.p, nav.v_eb_n, model)
        w = w - nav.C_b_n.T @ w_in
    return -w, _H_ZARU.copy()


def nhc_measurement(nav: NavState, imu: ImuSample, geom: VehicleGeometry,
                    b_g=None) -> tuple[np.ndarray, np.ndarray]:
    """Lateral/vertical zero-velocity constraint at the wheel frame."""
    C_n_b = nav.C_b_n.T
    w = imu.w_ib_b if b_g is None else imu.w_ib_b - b_g
    lever = np.abs(np.asarray(geom.lever_arm, dtype=float))
    v_wheel = C_n_b @ nav.v_eb_n - cross3(w, lever)
    dz = -_ROWS_YZ @ v_wheel
    H = np.zeros((2, N_STATES))
    H[:, VEL] = -_ROWS_YZ @ C_n_b
    return dz, H


def wheel_yaw_rate(rates, geom: VehicleGeometry) -> float:
    """Differential-drive yaw rate from (fl, fr, rl, rr) wheel rates."""
    fl, fr, rl, rr = rates
    return geom.wheel_radius * (0.5 * (fr + rr) - 0.5 * (fl + rl)) / geom.track_width


def detect_stationarity(imu_window, wheel_window, cfg: DetectorConfig, geom: VehicleGeometry) -> StationarityVerdict:
    """Raw (no hysteresis) verdict from one window of IMU and wheel samples."""
    imu_window = list(imu_window)
    if not imu_window:
        return StationarityVerdict(False, False, reason="window underfull")
    return _window_verdict(
        imu_window[-1].t - imu_window[0].t,
        [float(np.linalg.norm(s.f_ib_b)) for s in imu_window],
        [float(s.w_ib_b[2]) for s in imu_window],
        [tuple(ws.rates) for ws in wheel_window],
        cfg, geom,
    )


def _window_verdict(span, f_norm, wz, rates, cfg: DetectorConfig, geom: VehicleGeometry) -> StationarityVerdict:
    n = len(f_norm)
    if n < max(cfg.min_samples, 2) or not rates:
        return StationarityVerdict(False, False, n_samples=n, reason="window underfull")
    if span < cfg.window_length * (1.0 - 1e-6) - 1e-9:
        return StationarityVerdict(False, False, n_samples=n, reason="window underfull")

    max_rate = max(abs(x) for r in rates for x in r)
    speed = geom.wheel_radius * sum(abs(sum(r)) / 4.0 for r in rates) / len(rates)
    if max_rate >= cfg.omega_stop:
        # moving: skip the inertial statistics
        return StationarityVerdict(False, False, encoder_speed=speed, n_samples=n, reason="wheels turning")
    accel_std = float(np.std(f_norm))
    yaw_std = float(np.std(wz))
    wo_yaw = abs(sum(wheel_yaw_rate(r, geom) for r in rates) / len(rates))

    zero_v = accel_std < cfg.sigma_a
    zero_w = zero_v and yaw_std < cfg.sigma_g and wo_yaw < cfg.wo_yaw_rate_max
    if not zero_v:
        reason = "accelerometer active"
    elif not zero_w:
        reason = "rotation detected"
    else:
        reason = ""
    return StationarityVerdict(zero_v, zero_w, yaw_std, speed, accel_std, n, reason)


class StationarityDetector:
    """Sliding-window detector with assertion hysteresis.

    A verdict is asserted only after ``cfg.hysteresis`` consecutive positive raw
    evaluations; a single negative evaluation clears it.
    """

    def __init__(self, cfg: DetectorConfig, geom: VehicleGeometry):
        self.cfg = cfg
        self.geom = geom
        self._t: deque = deque()
        self._f_norm: deque = deque()
        self._wz: deque = deque()
        self._wheels: deque = deque()
        self._run_v = 0
        self._run_w = 0
        self.verdict = StationarityVerdict(False, False, reason="window underfull")

    def add_wheel(self, ws) -> None:
        self._wheels.append(ws)

    def add_imu(self, imu: ImuSample) -> StationarityVerdict:
        f = imu.f_ib_b
        self._t.append(imu.t)
        self._f_norm.append(math.sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]))
        self._wz.append(float(imu.w_ib_b[2]))
        t0 = imu.t - self.cfg.window_length - 1e-9
        while self._t[0] < t0:
            self._t.popleft()
            self._f_norm.popleft()
            self._wz.popleft()
        # keep the latest wheel sample at or before the window start as context
        while len(self._wheels) > 1 and self._wheels[1].t <= t0:
            self._wheels.popleft()
        raw = _window_verdict(self._t[-1] - self._t[0], self._f_norm, self._wz,
                              [ws.rates for ws in self._wheels], self.cfg, self.geom)
        self._run_v = self._run_v + 1 if raw.is_zero_velocity else 0
        self._run_w = self._run_w + 1 if raw.is_zero_angular_rate else 0
        h = self.cfg.hysteresis
        self.verdict = StationarityVerdict(
            self._run_v >= h, self._run_w >= h, raw.yaw_rate_std, raw.encoder_speed,
            raw.accel_std, raw.n_samples, raw.reason,
        )
        return self.verdict
