"""Strapdown INS mechanization in the local NED frame, curvilinear position."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, StreamGapError
from .geo import (
    WGS84,
    EllipsoidModel,
    GeoPosition,
    check_latitude,
    cross3,
    floats3,
    earth_rate_nav,
    gravity_nav,
    orthonormalize,
    radii_of_curvature,
    skew,
    transport_rate,
)

DEFAULT_MAX_STEP = 0.1


@dataclass(frozen=True)
class ImuSample:
    t: float
    f_ib_b: np.ndarray  # specific force, m/s^2
    w_ib_b: np.ndarray  # angular rate, rad/s

    def compensated(self, b_a, b_g) -> "ImuSample":
        return ImuSample(self.t, self.f_ib_b - b_a, self.w_ib_b - b_g)


@dataclass(frozen=True)
class NavState:
    C_b_n: np.ndarray
    v_eb_n: np.ndarray
    p: GeoPosition
    t: float = 0.0

    def with_time(self, t: float) -> "NavState":
        return replace(self, t=t)


_I3 = np.eye(3)


def _require_finite(result):
    # inf/nan in any input propagate into the result, and from there into its sum
    if not math.isfinite(result.sum()):
        raise DataError("non-finite value in mechanization input")
    return result


def attitude_update(C, w_ib_b, w_ie_n, w_en_n, tau):
    """First-order DCM update followed by re-orthonormalization."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    C_new = C @ (_I3 + skew(w_ib_b) * tau) - skew(w_ie_n + w_en_n) @ C * tau
    return orthonormalize(_require_finite(C_new))


def velocity_update(v, f_ib_b, C, p: GeoPosition, w_ie_n, w_en_n, tau, model: EllipsoidModel = WGS84):
    if tau <= 0:
        raise ValueError("tau must be positive")
    coriolis = cross3(w_en_n + 2.0 * w_ie_n, v)
    return _require_finite(v + (C @ f_ib_b + gravity_nav(p, model) - coriolis) * tau)


def position_update(p: GeoPosition, v_minus, v_plus, tau, model: EllipsoidModel = WGS84) -> GeoPosition:
    """Trapezoidal curvilinear position update: height, then latitude, then longitude."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    check_latitude(p.lat)
    r_n, r_e = radii_of_curvature(p.lat, model)
    n0, e0, d0 = floats3(v_minus)
    n1, e1, d1 = floats3(v_plus)
    h = p.h - 0.5 * tau * (d0 + d1)
    lat = p.lat + 0.5 * tau * (n0 / (r_n + p.h) + n1 / (r_n + h))
    check_latitude(lat)
    lon = p.lon + 0.5 * tau * (e0 / ((r_e + p.h) * math.cos(p.lat)) + e1 / ((r_e + h) * math.cos(lat)))
    return GeoPosition(lat, lon, h)


def mechanize_step(s: NavState, imu: ImuSample, model: EllipsoidModel = WGS84,
                   max_step: float = DEFAULT_MAX_STEP) -> NavState:
    tau = imu.t - s.t
    if tau <= 0:
        raise DataError(f"non-increasing IMU timestamp {imu.t!r} after {s.t!r}")
    if tau > max_step:
        raise StreamGapError(f"IMU gap of {tau:.4f} s at t={imu.t!r} exceeds {max_step} s")
    if not math.isfinite(sum(imu.f_ib_b) + sum(imu.w_ib_b)):
        raise DataError(f"non-finite IMU sample at t={imu.t!r}")
    w_ie = earth_rate_nav(s.p.lat, model)
    w_en = transport_rate(s.p, s.v_eb_n, model)
    C = attitude_update(s.C_b_n, imu.w_ib_b, w_ie, w_en, tau)
    v = velocity_update(s.v_eb_n, imu.f_ib_b, C, s.p, w_ie, w_en, tau, model)
    p = position_update(s.p, s.v_eb_n, v, tau, model)
    return NavState(C, v, p, imu.t)


def mechanize(initial: NavState, samples, model: EllipsoidModel = WGS84,
              max_step: float = DEFAULT_MAX_STEP) -> list[NavState]:
    """Free-running integration of a sample stream; returns every epoch including the start."""
    out = [initial]
    s = initial
    for imu in samples:
        s = mechanize_step(s, imu, model, max_step)
        out.append(s)
    return out
