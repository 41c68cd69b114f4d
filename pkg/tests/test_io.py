import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipnav.errors import DataError
from slipnav.io import (
    IMU_COLUMNS,
    Trajectory,
    find_gaps,
    read_imu,
    read_slip,
    read_trajectory,
    read_wheels,
    write_imu,
    write_slip,
    write_trajectory,
    write_wheels,
)
from slipnav.mechanization import ImuSample
from slipnav.slip import SlipClass, SlipRecord, WheelSample

HEADER = ",".join(IMU_COLUMNS)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_reads_three_rows_in_order(tmp_path):
    p = _write(tmp_path, "imu.csv", HEADER + "\n0.0,0,0,-9.8,0,0,0\n0.02,0.1,0,-9.8,0,0,0.01\n0.04,0,0,-9.8,0,0,0\n")
    imu = read_imu(p)
    assert [s.t for s in imu] == [0.0, 0.02, 0.04]
    np.testing.assert_array_equal(imu[1].f_ib_b, [0.1, 0.0, -9.8])
    np.testing.assert_array_equal(imu[1].w_ib_b, [0.0, 0.0, 0.01])


def test_shuffled_timestamps_name_the_line(tmp_path):
    p = _write(tmp_path, "imu.csv", HEADER + "\n0.0,0,0,-9.8,0,0,0\n0.04,0,0,-9.8,0,0,0\n0.02,0,0,-9.8,0,0,0\n")
    with pytest.raises(DataError, match=r"imu\.csv:4: non-monotonic"):
        read_imu(p)


def test_duplicate_timestamp_rejected(tmp_path):
    p = _write(tmp_path, "w.csv", "t,w_fl,w_fr,w_rl,w_rr\n0.1,1,1,1,1\n0.1,1,1,1,1\n")
    with pytest.raises(DataError, match=":3:"):
        read_wheels(p)


@pytest.mark.parametrize("text, pattern", [
    ("t,fx,fy,fz\n0,0,0,0\n", "expected header"),
    ("", "expected header"),
    (HEADER + "\n0.0,0,0,-9.8,0,0\n", ":2: expected 7 fields"),
    (HEADER + "\n0.0,0,zero,-9.8,0,0,0\n", ":2: non-numeric"),
    (HEADER + "\n0.0,0,0,nan,0,0,0\n", ":2: non-finite"),
    (HEADER + "\n0.0,0,0,-980.0,0,0,0\n", ":2: specific force .* unit check"),
])
def test_malformed_imu_files(tmp_path, text, pattern):
    with pytest.raises(DataError, match=pattern):
        read_imu(_write(tmp_path, "imu.csv", text))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        read_imu(tmp_path / "nope.csv")


def test_blank_lines_are_skipped(tmp_path):
    p = _write(tmp_path, "imu.csv", HEADER + "\n0.0,0,0,-9.8,0,0,0\n\n0.02,0,0,-9.8,0,0,0\n")
    assert len(read_imu(p)) == 2


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=True)


@settings(max_examples=25)
@given(st.lists(st.tuples(finite, finite, finite, finite, finite, finite), min_size=1, max_size=20))
def test_imu_round_trip_bit_exact(tmp_path_factory, rows):
    rows = [r for r in rows if np.linalg.norm(r[:3]) <= 50.0] or [(0.0,) * 6]
    samples = [ImuSample(0.1 * k + 1e-3 / 3, np.array(r[:3]), np.array(r[3:])) for k, r in enumerate(rows)]
    p = tmp_path_factory.mktemp("io") / "imu.csv"
    write_imu(p, samples)
    back = read_imu(p)
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert a.t == b.t
        assert np.array_equal(a.f_ib_b, b.f_ib_b) and np.array_equal(a.w_ib_b, b.w_ib_b)


def test_wheels_round_trip(tmp_path):
    ws = [WheelSample(0.1 * k, (k / 3, -k / 7, 1e-17, 2.0**0.5)) for k in range(5)]
    write_wheels(tmp_path / "w.csv", ws)
    assert read_wheels(tmp_path / "w.csv") == ws


def test_trajectory_round_trip(tmp_path):
    n = 6
    rng = np.random.default_rng(1)
    tr = Trajectory(np.arange(n) * 0.02, 0.69 + 1e-7 * rng.standard_normal(n), -1.39 + 1e-7 * rng.standard_normal(n),
                    300 + rng.standard_normal(n), rng.standard_normal((n, 3)), 0.01 * rng.standard_normal(n),
                    0.01 * rng.standard_normal(n), np.linspace(0, 5, n))
    write_trajectory(tmp_path / "t.csv", tr)
    back = read_trajectory(tmp_path / "t.csv")
    for name in ("t", "lat", "lon", "h", "v", "roll", "pitch", "yaw"):
        np.testing.assert_allclose(getattr(back, name), getattr(tr, name), rtol=1e-14, atol=1e-15)


def test_trajectory_yaw_is_unwrapped_on_read(tmp_path):
    p = _write(tmp_path, "t.csv", "t,lat_deg,lon_deg,h,vn,ve,vd,roll_deg,pitch_deg,yaw_deg\n"
               "0,40,-80,0,0,0,0,0,0,179\n1,40,-80,0,0,0,0,0,0,-179\n")
    yaw = np.degrees(read_trajectory(p).yaw)
    assert yaw[1] == pytest.approx(181.0)


def test_trajectory_shape_checked():
    with pytest.raises(DataError):
        Trajectory(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), np.zeros((3, 3)), np.zeros(2), np.zeros(2),
                   np.zeros(2))


def test_slip_round_trip(tmp_path):
    recs = [SlipRecord(0.1, 0.25, SlipClass.Medium, 0.6, 0.8),
            SlipRecord(0.2, -0.05, SlipClass.Low, 0.8, 0.76, -0.05, SlipClass.Low)]
    write_slip(tmp_path / "s.csv", recs)
    assert read_slip(tmp_path / "s.csv") == recs
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "t,s,class,v_x,r_omega,s_truth,class_truth"
    assert text[1].endswith(",,")


def test_slip_malformed(tmp_path):
    p = _write(tmp_path, "s.csv", "t,s,class,v_x,r_omega,s_truth,class_truth\n0.1,0.2,Huge,0,0,,\n")
    with pytest.raises(DataError, match=":2:"):
        read_slip(p)


def test_find_gaps():
    assert find_gaps([0.0, 0.02, 0.04, 0.5, 0.52], 0.1) == [(0.04, 0.5)]
    assert find_gaps([0.0, 0.02], 0.1) == []
