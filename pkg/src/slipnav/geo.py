"""Frames, rotations, ellipsoid geometry and gravity.

All navigation-frame vectors are NED (north, east, down). Angles are radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GimbalLockError, PolarRegionError

POLAR_LIMIT = math.radians(89.9)
ORTHO_TOL = 1e-9
_I3 = np.eye(3)


@dataclass(frozen=True)
class EllipsoidModel:
    """Reference ellipsoid plus the constants of its normal gravity field."""

    semi_major_axis: float  # m
    eccentricity_sq: float
    rotation_rate: float  # rad/s
    equatorial_gravity: float  # m/s^2
    somigliana_k: float
    flattening: float
    gm: float  # m^3/s^2

    def __post_init__(self):
        if self.semi_major_axis <= 0:
            raise ValueError("semi_major_axis must be positive")
        if not 0 <= self.eccentricity_sq < 1:
            raise ValueError("eccentricity_sq must lie in [0, 1)")


WGS84 = EllipsoidModel(
    semi_major_axis=6378137.0,
    eccentricity_sq=6.69437999014e-3,
    rotation_rate=7.292115e-5,
    equatorial_gravity=9.7803253359,
    somigliana_k=1.931853e-3,
    flattening=1 / 298.257223563,
    gm=3.986004418e14,
)

ELLIPSOIDS = {"wgs84": WGS84}


class GeoPosition(NamedTuple):
    lat: float  # rad
    lon: float  # rad
    h: float  # m above the ellipsoid


class Euler(NamedTuple):
    roll: float
    pitch: float
    yaw: float


def floats3(v) -> list[float]:
    """Components of a 3-vector as Python floats (scalar arithmetic on them is much cheaper)."""
    return v.tolist() if isinstance(v, np.ndarray) else [float(x) for x in v]


def skew(v) -> np.ndarray:
    """Skew-symmetric matrix such that ``skew(v) @ w == cross(v, w)``."""
    x, y, z = floats3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (cheaper than ``np.cross`` for single vectors)."""
    a0, a1, a2 = floats3(a)
    b0, b1, b2 = floats3(b)
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew` applied to the antisymmetric part of ``S``."""
    return 0.5 * np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]])


def check_latitude(lat: float) -> None:
    if abs(lat) > POLAR_LIMIT:
        raise PolarRegionError(f"latitude {math.degrees(lat):.4f} deg is inside the polar exclusion zone")


def radii_of_curvature(lat: float, model: EllipsoidModel = WGS84) -> tuple[float, float]:
    """Meridian (north) and transverse (east) radii of curvature in metres."""
    e2 = model.eccentricity_sq
    s2 = math.sin(lat) ** 2
    d = 1.0 - e2 * s2
    r_n = model.semi_major_axis * (1.0 - e2) / d**1.5
    r_e = model.semi_major_axis / math.sqrt(d)
    return r_n, r_e


def surface_gravity(lat: float, model: EllipsoidModel = WGS84) -> float:
    """Somigliana normal gravity on the ellipsoid surface."""
    s2 = math.sin(lat) ** 2
    return model.equatorial_gravity * (1.0 + model.somigliana_k * s2) / math.sqrt(1.0 - model.eccentricity_sq * s2)


def geocentric_radius(lat: float, model: EllipsoidModel = WGS84) -> float:
    """Distance from the Earth centre to the ellipsoid surface at ``lat``."""
    _, r_e = radii_of_curvature(lat, model)
    e2 = model.eccentricity_sq
    return r_e * math.sqrt(math.cos(lat) ** 2 + (1.0 - e2) ** 2 * math.sin(lat) ** 2)


def gravity_nav(p: GeoPosition, model: EllipsoidModel = WGS84) -> np.ndarray:
    """Gravity vector in NED; deflection of the vertical is neglected."""
    g0 = surface_gravity(p.lat, model)
    a = model.semi_major_axis
    f = model.flattening
    m = model.rotation_rate**2 * a**2 * a * (1.0 - f) / model.gm
    free_air = 1.0 - 2.0 / a * (1.0 + f + m - 2.0 * f * math.sin(p.lat) ** 2) * p.h
    return np.array([0.0, 0.0, g0 * free_air])


def earth_rate_nav(lat: float, model: EllipsoidModel = WGS84) -> np.ndarray:
    w = model.rotation_rate
    return np.array([w * math.cos(lat), 0.0, -w * math.sin(lat)])


def transport_rate(p: GeoPosition, v, model: EllipsoidModel = WGS84) -> np.ndarray:
    """Rotation rate of the NED frame relative to the Earth caused by motion."""
    check_latitude(p.lat)
    r_n, r_e = radii_of_curvature(p.lat, model)
    vn, ve, _ = floats3(v)
    return np.array([
        ve / (r_e + p.h),
        -vn / (r_n + p.h),
        -ve * math.tan(p.lat) / (r_e + p.h),
    ])


def euler_to_dcm(e: Euler) -> np.ndarray:
    """Body-to-NED DCM for a z-y-x (yaw, pitch, roll) rotation sequence."""
    sr, cr = math.sin(e.roll), math.cos(e.roll)
    sp, cp = math.sin(e.pitch), math.cos(e.pitch)
    sy, cy = math.sin(e.yaw), math.cos(e.yaw)
    return np.array([
        [cp * cy, -cr * sy + sr * sp * cy, sr * sy + cr * sp * cy],
        [cp * sy, cr * cy + sr * sp * sy, -sr * cy + cr * sp * sy],
        [-sp, sr * cp, cr * cp],
    ])


def dcm_to_euler(C: np.ndarray) -> Euler:
    """Extract roll, pitch, yaw from a body-to-NED DCM.

    Raises
    ------
    GimbalLockError
        If pitch is at +/-90 deg, where roll and yaw are not separable.
    """
    if abs(C[2, 0]) >= 1.0 - 1e-12:
        raise GimbalLockError("pitch is at +/-90 deg")
    return Euler(
        math.atan2(C[2, 1], C[2, 2]),
        math.asin(-C[2, 0]),
        math.atan2(C[1, 0], C[0, 0]),
    )


def orthonormality_error(C: np.ndarray) -> float:
    return float(abs(C.T @ C - _I3).max())


def orthonormalize(C: np.ndarray, tol: float = 1e-12, accept: float = 1e-10, max_iter: int = 5) -> np.ndarray:
    """Symmetric correction ``C <- C - C (C^T C - I) / 2``.

    The step is taken whenever the largest element ``e`` of ``C^T C - I``
    reaches ``tol``. One step leaves a residual of at most ``2.25 e^2``, so it
    is repeated only when that bound exceeds ``accept``.
    """
    for _ in range(max_iter):
        E = C.T @ C - _I3
        e = abs(E).max()
        if e < tol:
            break
        C = C - 0.5 * C @ E
        if 2.25 * e * e < accept:
            break
    return C


def geodetic_to_ecef(p: GeoPosition, model: EllipsoidModel = WGS84) -> np.ndarray:
    _, r_e = radii_of_curvature(p.lat, model)
    cl, sl = math.cos(p.lat), math.sin(p.lat)
    return np.array([
        (r_e + p.h) * cl * math.cos(p.lon),
        (r_e + p.h) * cl * math.sin(p.lon),
        (r_e * (1.0 - model.eccentricity_sq) + p.h) * sl,
    ])


def enu_from_geodetic(lat, lon, h, origin: GeoPosition, model: EllipsoidModel = WGS84) -> np.ndarray:
    """East/north/up offsets (N x 3) of geodetic points relative to ``origin``.

    Uses the tangent plane at the origin; inputs may be scalars or arrays in radians.
    """
    lat, lon, h = np.atleast_1d(lat, lon, h)
    e2 = model.eccentricity_sq
    r_e = model.semi_major_axis / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
    xyz = np.stack([
        (r_e + h) * np.cos(lat) * np.cos(lon),
        (r_e + h) * np.cos(lat) * np.sin(lon),
        (r_e * (1.0 - e2) + h) * np.sin(lat),
    ], axis=1)
    d = xyz - geodetic_to_ecef(origin, model)
    sl, cl = math.sin(origin.lat), math.cos(origin.lat)
    so, co = math.sin(origin.lon), math.cos(origin.lon)
    R = np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])
    return d @ R.T


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi
