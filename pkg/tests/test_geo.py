import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipnav.errors import GimbalLockError, PolarRegionError
from slipnav.geo import (
    WGS84,
    Euler,
    GeoPosition,
    dcm_to_euler,
    earth_rate_nav,
    enu_from_geodetic,
    euler_to_dcm,
    gravity_nav,
    orthonormality_error,
    orthonormalize,
    radii_of_curvature,
    skew,
    transport_rate,
    wrap_angle,
)

A = 6378137.0
E2 = 6.69437999014e-3
finite = st.floats(-10.0, 10.0, allow_nan=False)


def test_skew_definition():
    np.testing.assert_array_equal(skew((1, 2, 3)), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])
    np.testing.assert_array_equal(skew((0, 0, 0)), np.zeros((3, 3)))


def test_skew_annihilates_own_vector():
    v = np.array([0.3, -1.2, 7.0])
    np.testing.assert_allclose(skew(v) @ v, 0.0, atol=1e-15)


@given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
def test_skew_matches_cross_product(a, b):
    np.testing.assert_allclose(skew(a) @ np.array(b), np.cross(a, b), atol=1e-12)


def test_radii_at_equator():
    r_n, r_e = radii_of_curvature(0.0)
    assert r_e == 6378137.0
    assert r_n == pytest.approx(A * (1 - E2), abs=1e-6)
    assert r_n == pytest.approx(6335439.33, abs=0.01)


def test_radii_at_pole_coincide():
    r_n, r_e = radii_of_curvature(math.pi / 2)
    expected = A / math.sqrt(1 - E2)
    assert r_n == pytest.approx(expected, rel=1e-12)
    assert r_e == pytest.approx(expected, rel=1e-12)


def test_meridian_radius_grows_towards_pole():
    assert radii_of_curvature(0.0)[0] < radii_of_curvature(math.pi / 4)[0] < radii_of_curvature(math.pi / 2)[0]


def _somigliana(lat):
    s2 = math.sin(lat) ** 2
    return 9.7803253359 * (1 + 0.001931853 * s2) / math.sqrt(1 - E2 * s2)


@pytest.mark.parametrize("lat, approx", [(0.0, 9.7803), (math.pi / 2, 9.8322)])
def test_surface_gravity(lat, approx):
    g = gravity_nav(GeoPosition(lat, 0.0, 0.0))
    assert g[0] == 0.0 and g[1] == 0.0
    assert g[2] == pytest.approx(_somigliana(lat), abs=1e-12)
    assert g[2] == pytest.approx(approx, abs=1e-4)


def test_gravity_decreases_with_height():
    assert gravity_nav(GeoPosition(0.6, 0.0, 1000.0))[2] < gravity_nav(GeoPosition(0.6, 0.0, 0.0))[2]


def test_free_air_gradient_is_about_3_microgal_per_metre():
    dg = gravity_nav(GeoPosition(0.6, 0.0, 0.0))[2] - gravity_nav(GeoPosition(0.6, 0.0, 100.0))[2]
    assert dg / 100.0 == pytest.approx(3.086e-6, rel=0.01)


def test_earth_rate():
    w = WGS84.rotation_rate
    np.testing.assert_allclose(earth_rate_nav(0.0), [w, 0, 0], atol=1e-20)
    np.testing.assert_allclose(earth_rate_nav(math.pi / 2), [0, 0, -w], atol=1e-20)
    assert np.linalg.norm(earth_rate_nav(0.3)) == pytest.approx(w, rel=1e-15)


def test_transport_rate_examples():
    p = GeoPosition(0.0, 0.0, 0.0)
    np.testing.assert_array_equal(transport_rate(p, np.zeros(3)), np.zeros(3))
    r_n, _ = radii_of_curvature(0.0)
    np.testing.assert_allclose(transport_rate(p, np.array([1.0, 0, 0])), [0, -1 / r_n, 0], atol=1e-22)


def test_transport_rate_independent_formula():
    lat, h = 0.5, 100.0
    s2 = math.sin(lat) ** 2
    r_e = A / math.sqrt(1 - E2 * s2)
    expected = [1 / (r_e + h), 0.0, -math.tan(lat) / (r_e + h)]
    np.testing.assert_allclose(transport_rate(GeoPosition(lat, 0.0, h), np.array([0.0, 1.0, 0.0])), expected,
                               rtol=1e-13, atol=1e-22)


def test_euler_identity_and_quarter_turn():
    np.testing.assert_array_equal(euler_to_dcm(Euler(0, 0, 0)), np.eye(3))
    e = dcm_to_euler(euler_to_dcm(Euler(0, 0, math.pi / 2)))
    assert e.yaw == pytest.approx(math.pi / 2, abs=1e-15)
    assert abs(e.roll) < 1e-15 and abs(e.pitch) < 1e-15


@given(st.floats(-math.pi, math.pi), st.floats(-1.4, 1.4), st.floats(-math.pi + 1e-9, math.pi))
def test_euler_round_trip(roll, pitch, yaw):
    e = dcm_to_euler(euler_to_dcm(Euler(roll, pitch, yaw)))
    assert wrap_angle(e.roll - roll) == pytest.approx(0.0, abs=1e-12)
    assert e.pitch == pytest.approx(pitch, abs=1e-12)
    assert wrap_angle(e.yaw - yaw) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5), st.floats(-math.pi, math.pi))
def test_dcm_is_rotation(roll, pitch, yaw):
    C = euler_to_dcm(Euler(roll, pitch, yaw))
    assert orthonormality_error(C) < 1e-15
    assert np.linalg.det(C) == pytest.approx(1.0, abs=1e-14)


def test_gimbal_lock_reported():
    with pytest.raises(GimbalLockError):
        dcm_to_euler(euler_to_dcm(Euler(0.0, math.pi / 2, 0.0)))


def test_polar_region_rejected():
    with pytest.raises(PolarRegionError):
        transport_rate(GeoPosition(math.radians(89.95), 0.0, 0.0), np.ones(3))


def test_orthonormalize_restores_rotation():
    rng = np.random.default_rng(3)
    C = euler_to_dcm(Euler(0.3, 0.2, -1.0)) + 1e-5 * rng.standard_normal((3, 3))
    assert orthonormality_error(orthonormalize(C)) < 1e-12


def test_enu_offsets():
    o = GeoPosition(0.7, -1.2, 250.0)
    r_n, r_e = radii_of_curvature(o.lat)
    d = enu_from_geodetic(o.lat + 1.0 / (r_n + o.h), o.lon, o.h, o)
    np.testing.assert_allclose(d[0], [0.0, 1.0, 0.0], atol=1e-6)
    d = enu_from_geodetic(o.lat, o.lon + 1.0 / ((r_e + o.h) * math.cos(o.lat)), o.h + 2.0, o)
    np.testing.assert_allclose(d[0], [1.0, 0.0, 2.0], atol=1e-6)


@given(st.floats(-50.0, 50.0))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
