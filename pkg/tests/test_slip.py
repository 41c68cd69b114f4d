import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from slipnav.geo import Euler, GeoPosition, euler_to_dcm
from slipnav.mechanization import NavState
from slipnav.pseudo import VehicleGeometry
from slipnav.slip import (
    SlipClass,
    SlipRecord,
    WheelSample,
    body_velocity,
    classify,
    confusion_matrix,
    is_valid_slip,
    make_record,
    slip_ratio,
    truth_slip,
    weighted_accuracy,
    wheel_speed,
    with_truth,
)

GEOM = VehicleGeometry()
P0 = GeoPosition(0.6, 0.0, 0.0)
speed = st.floats(0.02, 5.0)


def test_body_velocity_identity():
    nav = NavState(np.eye(3), np.array([1.0, 0.0, 0.0]), P0)
    np.testing.assert_array_equal(body_velocity(nav), [1.0, 0.0, 0.0])


def test_body_velocity_facing_east():
    nav = NavState(euler_to_dcm(Euler(0.0, 0.0, math.pi / 2)), np.array([0.0, 1.0, 0.0]), P0)
    assert body_velocity(nav)[0] == pytest.approx(1.0, abs=1e-15)


@given(st.floats(-3, 3), st.floats(-1.4, 1.4), st.floats(-3, 3), st.tuples(speed, speed, speed))
def test_body_velocity_preserves_norm(r, p, y, v):
    nav = NavState(euler_to_dcm(Euler(r, p, y)), np.array(v), P0)
    assert np.linalg.norm(body_velocity(nav)) == pytest.approx(np.linalg.norm(v), rel=1e-12)


@pytest.mark.parametrize("rates, omega, r_omega", [
    ((2.0, 2.0, 2.0, 2.0), 2.0, 0.24),
    ((0.0, 0.0, 0.0, 0.0), 0.0, 0.0),
    ((1.0, 3.0, 1.0, 3.0), 2.0, 0.24),
])
def test_wheel_speed(rates, omega, r_omega):
    om, ro = wheel_speed(WheelSample(0.0, rates), GEOM)
    assert om == pytest.approx(omega, abs=1e-15)
    assert ro == pytest.approx(r_omega, abs=1e-15)


def test_wheel_sides():
    ws = WheelSample(0.0, (1.0, 3.0, 2.0, 4.0))
    assert ws.left == 1.5 and ws.right == 3.5


@pytest.mark.parametrize("v_x, r_omega, s", [
    (0.5, 0.5, 0.0),
    (0.4, 0.8, 0.5),
    (0.8, 0.4, -0.5),
    (0.0, 0.0, 0.0),
    (0.0, 0.5, 1.0),  # spinning in place
    (0.5, 0.0, -1.0),  # locked wheels
    (0.005, 0.5, 1.0),  # v_x inside the near-zero band
    (-0.4, -0.8, 0.5),  # reverse driving mirrors
])
def test_slip_ratio_examples(v_x, r_omega, s):
    assert slip_ratio(v_x, r_omega) == pytest.approx(s, abs=1e-15)


@given(speed, speed)
def test_slip_ratio_antisymmetric(a, b):
    assert slip_ratio(a, b) == pytest.approx(-slip_ratio(b, a), abs=1e-12)


@given(speed, speed, st.floats(0.1, 10.0))
def test_slip_ratio_scale_invariant(a, b, k):
    # the near-zero guard deliberately breaks scaling inside its band
    assume(min(k * a, k * b) >= 0.01)
    assert slip_ratio(k * a, k * b) == pytest.approx(slip_ratio(a, b), abs=1e-12)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_slip_ratio_bounded(a, b):
    assert is_valid_slip(slip_ratio(a, b))


@pytest.mark.parametrize("s, cls", [
    (0.0, SlipClass.NoSlip),
    (0.01, SlipClass.NoSlip),
    (-0.0101, SlipClass.Low),
    (0.2, SlipClass.Low),
    (0.3, SlipClass.Medium),
    (-0.3, SlipClass.Medium),
    (0.4, SlipClass.Medium),
    (0.7, SlipClass.High),
    (0.7000001, SlipClass.Extreme),
    (-1.0, SlipClass.Extreme),
])
def test_classify_examples(s, cls):
    assert classify(s) is cls


@given(st.floats(0, 1), st.floats(0, 1))
def test_classify_monotone(a, b):
    lo, hi = sorted((a, b))
    assert classify(lo) <= classify(hi)
    assert classify(-hi) == classify(hi)


def test_classify_band_configurable():
    assert classify(0.04, no_slip_band=0.05) is SlipClass.NoSlip
    assert classify(0.04) is SlipClass.Low


@pytest.mark.parametrize("v, r_omega, s", [(0.6, 0.6, 0.0), (0.2, 0.8, 0.75)])
def test_truth_slip_examples(v, r_omega, s):
    assert truth_slip(v, r_omega) == pytest.approx(s, abs=1e-15)


def _rec(est, truth):
    return SlipRecord(0.0, 0.0, est, 0.0, 0.0, 0.0, truth)


def test_confusion_counting_example():
    recs = [_rec(SlipClass.Low, SlipClass.Low)] * 9 + [_rec(SlipClass.Medium, SlipClass.Low)]
    cm = confusion_matrix(recs)
    np.testing.assert_allclose(cm.column(SlipClass.Low), [0.0, 90.0, 10.0, 0.0, 0.0], atol=1e-12)
    assert cm.counts[SlipClass.Low] == 10
    assert cm.accuracy == pytest.approx(0.9)
    # empty truth classes are undefined, not zero
    assert np.isnan(cm.column(SlipClass.High)).all()


def test_confusion_perfect_agreement_is_identity():
    recs = [_rec(c, c) for c in SlipClass for _ in range(int(c) + 1)]
    cm = confusion_matrix(recs)
    np.testing.assert_array_equal(cm.percent, 100.0 * np.eye(5))
    np.testing.assert_array_equal(cm.counts, [1, 2, 3, 4, 5])
    assert cm.accuracy == 1.0


@given(st.lists(st.tuples(st.sampled_from(list(SlipClass)), st.sampled_from(list(SlipClass))), min_size=1))
def test_confusion_columns_sum_to_100(pairs):
    cm = confusion_matrix([_rec(e, t) for e, t in pairs])
    sums = np.nansum(cm.percent, axis=0)
    for c in range(5):
        if cm.counts[c]:
            assert sums[c] == pytest.approx(100.0, abs=1e-9)
    assert cm.counts.sum() == len(pairs)


def test_confusion_requires_truth():
    with pytest.raises(ValueError):
        confusion_matrix([SlipRecord(1.0, 0.0, SlipClass.NoSlip, 0.0, 0.0)])


# Long-traverse field slip-detection table: rows estimated class, columns truth class
LF_TABLE = np.array([
    [98.3, 0.7, 0.4, 0.3, 0.4],
    [1.4, 91.9, 77.1, 42.2, 39.0],
    [0.2, 7.1, 19.8, 30.2, 8.5],
    [0.1, 0.3, 2.6, 24.0, 13.6],
    [0.0, 0.1, 0.2, 3.2, 38.6],
])
LF_COUNTS = np.array([2303, 5627, 1809, 308, 236])


def test_reference_table_columns_sum_to_100():
    np.testing.assert_allclose(LF_TABLE.sum(axis=0), 100.0, atol=0.1 + 1e-9)


def test_weighted_accuracy_matches_hand_arithmetic():
    # 98.3*2303 + 91.9*5627 + 19.8*1809 + 24.0*308 + 38.6*236 = 795826.0 over 10283 records
    hand = 7958.26 / 10283
    assert weighted_accuracy(np.diag(LF_TABLE), LF_COUNTS) == pytest.approx(hand, rel=1e-12)
    assert hand == pytest.approx(0.7739, abs=1e-4)


def test_confusion_accuracy_on_synthetic_reference_set():
    """Records built to reproduce the field-table diagonal rates give the same weighted accuracy."""
    recs = []
    for c, n in enumerate(LF_COUNTS):
        hits = round(LF_TABLE[c, c] / 100.0 * n)
        recs += [_rec(SlipClass(c), SlipClass(c))] * hits
        wrong = SlipClass((c + 1) % 5)
        recs += [_rec(wrong, SlipClass(c))] * (n - hits)
    cm = confusion_matrix(recs)
    np.testing.assert_array_equal(cm.counts, LF_COUNTS)
    np.testing.assert_allclose(np.diag(cm.percent), np.diag(LF_TABLE), atol=0.05)
    assert cm.accuracy == pytest.approx(weighted_accuracy(np.diag(cm.percent), cm.counts), rel=1e-12)
    assert cm.accuracy == pytest.approx(7958.26 / 10283, abs=5e-4)


def test_weighted_accuracy_skips_empty_classes():
    assert weighted_accuracy([100.0, float("nan")], [5, 0]) == 1.0


def test_make_record_and_truth():
    nav = NavState(np.eye(3), np.array([0.4, 0.0, 0.0]), P0)
    ws = WheelSample(1.0, (0.8 / 0.12,) * 4)
    rec = make_record(1.0, nav, ws, GEOM)
    assert rec.s == pytest.approx(0.5, abs=1e-12)
    assert rec.cls is SlipClass.High
    full = with_truth(rec, 0.4)
    assert full.s_truth == pytest.approx(0.5, abs=1e-12)
    assert full.class_truth is SlipClass.High
