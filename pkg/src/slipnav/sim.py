"""Ground-truth scenario generator.

Truth trajectories are built from piecewise motion primitives on a flat, level
patch of the ellipsoid. IMU samples are obtained by inverting the
mechanization step by step, so noise-free synthesis fed back through
:func:`slipnav.mechanization.mechanize_step` reproduces the truth. Wheel
encoder rates are obtained by inverting the slip-ratio definition.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .errors import ScenarioError
from .eskf import NoiseConfig
from .geo import (
    WGS84,
    EllipsoidModel,
    Euler,
    cross3,
    GeoPosition,
    earth_rate_nav,
    euler_to_dcm,
    gravity_nav,
    skew,
    transport_rate,
    vee,
)
from .io import Trajectory
from .mechanization import ImuSample, NavState, attitude_update, position_update
from .pseudo import VehicleGeometry
from .slip import WheelSample, truth_slip

MAX_SEGMENT_SPEED = 2.0  # m/s
_DEG = math.pi / 180.0
_G0 = 9.80665

NOMINAL_GYRO_BIAS = 1.6 * _DEG / 3600.0  # rad/s
NOMINAL_ACCEL_BIAS = 3.2e-6 * _G0  # m/s^2


@dataclass(frozen=True)
class Segment:
    kind: str  # "stop" | "straight" | "arc"
    duration: float
    speed: float = 0.0
    yaw_rate: float = 0.0
    slip: float = 0.0

    def __post_init__(self):
        if self.kind not in ("stop", "straight", "arc"):
            raise ScenarioError(f"unknown segment kind {self.kind!r}")
        if not self.duration > 0:
            raise ScenarioError("segment duration must be positive")
        if abs(self.speed) > MAX_SEGMENT_SPEED:
            raise ScenarioError(f"segment speed {self.speed} m/s exceeds the {MAX_SEGMENT_SPEED} m/s platform bound")
        if not abs(self.slip) < 1.0:
            raise ScenarioError("injected slip must satisfy |s| < 1")
        if self.kind == "stop" and (self.speed != 0.0 or self.yaw_rate != 0.0):
            raise ScenarioError("stop segments must have zero speed and yaw rate")
        if self.kind == "straight" and self.yaw_rate != 0.0:
            raise ScenarioError("straight segments must have zero yaw rate")


@dataclass(frozen=True)
class UpdateSchedule:
    """Externally controlled zero-update epochs (used when stationarity is known)."""

    zero_update_times: tuple[float, ...] = ()
    continuous_after: float | None = None
    nhc_every_step: bool = True

    def zero_update_at(self, t: float, tol: float = 1e-6) -> bool:
        if self.continuous_after is not None and t >= self.continuous_after - tol:
            return True
        return any(abs(t - z) < tol for z in self.zero_update_times)


@dataclass(frozen=True)
class ScenarioSpec:
    segments: tuple[Segment, ...]
    imu_rate: float = 50.0
    wheel_rate: float = 10.0
    start: GeoPosition = GeoPosition(39.74 * _DEG, -79.9 * _DEG, 300.0)
    start_yaw: float = 0.0
    accel_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise: NoiseConfig | None = field(default_factory=NoiseConfig)
    bias_random_walk: bool = False
    encoder_noise: float = 0.0  # rad/s, white
    max_accel: float = 0.8  # m/s^2, for speed ramps
    seed: int = 0
    schedule: UpdateSchedule | None = None
    filter_overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.segments:
            raise ScenarioError("scenario needs at least one segment")
        if self.imu_rate <= 0 or self.wheel_rate <= 0:
            raise ScenarioError("sensor rates must be positive")
        if self.max_accel <= 0:
            raise ScenarioError("max_accel must be positive")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return replace(self, seed=seed)


@dataclass
class TruthLog:
    t: np.ndarray
    C_b_n: np.ndarray  # (N, 3, 3)
    v: np.ndarray  # (N, 3) NED
    lat: np.ndarray
    lon: np.ndarray
    h: np.ndarray
    yaw: np.ndarray  # unwrapped
    yaw_rate: np.ndarray
    speed: np.ndarray
    segment_index: np.ndarray
    # wheel epochs
    t_wheel: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    r_omega: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slip_injected: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slip: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def nav(self, k: int) -> NavState:
        return NavState(self.C_b_n[k].copy(), self.v[k].copy(),
                        GeoPosition(float(self.lat[k]), float(self.lon[k]), float(self.h[k])), float(self.t[k]))

    def __len__(self) -> int:
        return len(self.t)

    def trajectory(self) -> Trajectory:
        """Truth at IMU epochs in the trajectory log format (level body, so roll = pitch = 0)."""
        z = np.zeros(len(self.t))
        return Trajectory(self.t.copy(), self.lat.copy(), self.lon.copy(), self.h.copy(), self.v.copy(), z, z.copy(),
                          self.yaw.copy())


class _Profile:
    """Piecewise speed / heading profile derived from the segment list."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        segs = spec.segments
        self.t0 = np.concatenate([[0.0], np.cumsum([s.duration for s in segs])])
        self.yaw0 = np.empty(len(segs))
        yaw = spec.start_yaw
        for i, s in enumerate(segs):
            self.yaw0[i] = yaw
            yaw += s.yaw_rate * s.duration
        # ramps: (start speed, ramp-in time, ramp-out time)
        self.ramps = []
        prev = 0.0
        for i, s in enumerate(segs):
            target = s.speed
            t_in = abs(target - prev) / spec.max_accel if s.kind != "stop" else 0.0
            nxt = segs[i + 1] if i + 1 < len(segs) else None
            ends_at_rest = s.kind != "stop" and (nxt is None or nxt.kind == "stop")
            t_out = abs(target) / spec.max_accel if ends_at_rest else 0.0
            if s.kind != "stop" and t_in + t_out > s.duration + 1e-12:
                raise ScenarioError(f"segment {i} is too short for its speed ramps")
            if s.kind == "stop" and abs(prev) > 0.0:
                raise ScenarioError(f"segment {i}: stop entered while moving")
            self.ramps.append((prev, t_in, t_out))
            prev = 0.0 if (s.kind == "stop" or ends_at_rest) else target

    def index(self, t: float) -> int:
        i = int(np.searchsorted(self.t0, t + 1e-12, side="right")) - 1
        return min(max(i, 0), len(self.spec.segments) - 1)

    def at(self, t: float) -> tuple[int, float, float, float]:
        """Segment index, speed, yaw and yaw rate at time ``t``."""
        i = self.index(t)
        s = self.spec.segments[i]
        tau = t - self.t0[i]
        v0, t_in, t_out = self.ramps[i]
        if s.kind == "stop":
            speed = 0.0
        elif tau < t_in:
            speed = v0 + (s.speed - v0) * tau / t_in
        elif t_out > 0.0 and tau > s.duration - t_out:
            speed = s.speed * max(0.0, s.duration - tau) / t_out
        else:
            speed = s.speed
        yaw = self.yaw0[i] + s.yaw_rate * tau
        return i, speed, yaw, s.yaw_rate


def _epochs(duration: float, rate: float) -> np.ndarray:
    n = int(math.floor(duration * rate + 1e-9))
    return np.round(np.arange(n + 1) / rate, 9)


def generate_truth(spec: ScenarioSpec, geom: VehicleGeometry | None = None,
                   model: EllipsoidModel = WGS84) -> TruthLog:
    """Truth navigation states at IMU epochs and truth slip quantities at wheel epochs."""
    geom = geom or VehicleGeometry()
    prof = _Profile(spec)
    t = _epochs(spec.duration, spec.imu_rate)
    n = len(t)
    C = np.empty((n, 3, 3))
    v = np.zeros((n, 3))
    lat, lon, h = np.empty(n), np.empty(n), np.empty(n)
    yaw, yaw_rate, speed = np.empty(n), np.empty(n), np.empty(n)
    seg = np.empty(n, dtype=int)
    p = spec.start
    for k, tk in enumerate(t):
        i, u, psi, r = prof.at(float(tk))
        seg[k], speed[k], yaw[k], yaw_rate[k] = i, u, psi, r
        C[k] = euler_to_dcm(Euler(0.0, 0.0, psi))
        v[k] = (u * math.cos(psi), u * math.sin(psi), 0.0)
        if k > 0:
            p = position_update(p, v[k - 1], v[k], float(tk - t[k - 1]), model)
        lat[k], lon[k], h[k] = p

    tw = _epochs(spec.duration, spec.wheel_rate)
    vx = np.empty(len(tw))
    r_omega = np.empty(len(tw))
    s_inj = np.empty(len(tw))
    s_tr = np.empty(len(tw))
    for j, tj in enumerate(tw):
        i, u, _, _ = prof.at(float(tj))
        s = spec.segments[i].slip
        vx[j] = u
        r_omega[j] = invert_slip(u, s)
        s_inj[j] = s
        s_tr[j] = truth_slip(u, r_omega[j])
    return TruthLog(t, C, v, lat, lon, h, yaw, yaw_rate, speed, seg, tw, vx, r_omega, s_inj, s_tr)


def invert_slip(v_x: float, s: float) -> float:
    """Rolling speed r*omega that produces slip ``s`` at body speed ``v_x``."""
    if s > 0.0:
        return v_x / (1.0 - s)
    return v_x * (1.0 + s)


def _ideal_imu(truth: TruthLog, model: EllipsoidModel) -> tuple[np.ndarray, np.ndarray]:
    n = len(truth)
    f = np.zeros((n, 3))
    w = np.zeros((n, 3))
    C_m = truth.C_b_n[0].copy()
    eye = np.eye(3)
    for k in range(n - 1):
        tau = float(truth.t[k + 1] - truth.t[k])
        p = GeoPosition(float(truth.lat[k]), float(truth.lon[k]), float(truth.h[k]))
        v0, v1 = truth.v[k], truth.v[k + 1]
        w_ie = earth_rate_nav(p.lat, model)
        w_en = transport_rate(p, v0, model)
        Omega = skew(w_ie + w_en)
        A = C_m.T @ (truth.C_b_n[k + 1] + Omega @ C_m * tau) - eye
        w_k = vee(A) / tau
        C_m = attitude_update(C_m, w_k, w_ie, w_en, tau)
        a_n = (v1 - v0) / tau - gravity_nav(p, model) + cross3(w_en + 2.0 * w_ie, v0)
        w[k + 1] = w_k
        f[k + 1] = C_m.T @ a_n
    # sample 0 is never integrated; give it the stationary-consistent value
    p0 = GeoPosition(float(truth.lat[0]), float(truth.lon[0]), float(truth.h[0]))
    f[0] = -truth.C_b_n[0].T @ gravity_nav(p0, model)
    w[0] = truth.C_b_n[0].T @ earth_rate_nav(p0.lat, model)
    return f, w


def synthesize_imu(truth: TruthLog, spec: ScenarioSpec, model: EllipsoidModel = WGS84) -> list[ImuSample]:
    """IMU samples at truth epochs: ideal values plus constant bias and seeded white noise."""
    f, w = _ideal_imu(truth, model)
    n = len(truth)
    rng = np.random.default_rng(spec.seed)
    dt = 1.0 / spec.imu_rate
    f = f + np.asarray(spec.accel_bias, dtype=float)
    w = w + np.asarray(spec.gyro_bias, dtype=float)
    if spec.noise is not None:
        f = f + rng.standard_normal((n, 3)) * math.sqrt(spec.noise.s_ra / dt)
        w = w + rng.standard_normal((n, 3)) * math.sqrt(spec.noise.s_rg / dt)
        if spec.bias_random_walk:
            f = f + np.cumsum(rng.standard_normal((n, 3)) * math.sqrt(spec.noise.s_bad * dt), axis=0)
            w = w + np.cumsum(rng.standard_normal((n, 3)) * math.sqrt(spec.noise.s_bgd * dt), axis=0)
    return [ImuSample(float(truth.t[k]), f[k], w[k]) for k in range(n)]


def synthesize_wheels(truth: TruthLog, spec: ScenarioSpec, geom: VehicleGeometry | None = None) -> list[WheelSample]:
    """Per-wheel encoder rates; each side rolls at its own speed with the injected slip applied."""
    geom = geom or VehicleGeometry()
    prof = _Profile(spec)
    rng = np.random.default_rng([spec.seed, 1])
    out = []
    half = 0.5 * geom.track_width
    for j, tj in enumerate(truth.t_wheel):
        _, u, _, r = prof.at(float(tj))
        s = truth.slip_injected[j]
        left = invert_slip(u - r * half, s) / geom.wheel_radius
        right = invert_slip(u + r * half, s) / geom.wheel_radius
        rates = np.array([left, right, left, right])
        if spec.encoder_noise > 0:
            rates = rates + rng.standard_normal(4) * spec.encoder_noise
        out.append(WheelSample(float(tj), tuple(float(x) for x in rates)))
    return out


def simulate(spec: ScenarioSpec, geom: VehicleGeometry | None = None, model: EllipsoidModel = WGS84):
    """Truth log, IMU stream and wheel stream for a scenario."""
    geom = geom or VehicleGeometry()
    truth = generate_truth(spec, geom, model)
    return truth, synthesize_imu(truth, spec, model), synthesize_wheels(truth, spec, geom)


# ---------------------------------------------------------------------------
# built-in scenarios

def _nominal_biases() -> dict[str, tuple[float, float, float]]:
    return {
        "accel_bias": (NOMINAL_ACCEL_BIAS, NOMINAL_ACCEL_BIAS, -NOMINAL_ACCEL_BIAS),
        "gyro_bias": (NOMINAL_GYRO_BIAS, -NOMINAL_GYRO_BIAS, NOMINAL_GYRO_BIAS),
    }


def static_toy_scenario(seed: int = 0) -> ScenarioSpec:
    """300 s stationary IMU at 50 Hz with zero updates every 40 s, continuous from 200 s."""
    return ScenarioSpec(
        segments=(Segment("stop", 300.0),),
        imu_rate=50.0,
        seed=seed,
        schedule=UpdateSchedule(zero_update_times=(40.0, 80.0, 120.0, 160.0, 200.0), continuous_after=200.0,
                                nhc_every_step=True),
        **_nominal_biases(),
    )


def stop_and_go_scenario(seed: int = 0, speed: float = 0.8) -> ScenarioSpec:
    """About 150 m of driving in five blocks separated by stops.

    Driving time per slip class is proportional to a short fast field traverse:
    roughly 39 % stationary, 48 % low, 11 % medium, 1 % high and 0.4 % extreme slip.
    """
    low, med, high, ext = 0.1, 0.3, 0.55, 0.85
    stop = Segment("stop", 21.05)
    blocks = [
        [("straight", 30.0, low), ("straight", 1.7, high), ("arc", 8.0, low)],
        [("straight", 20.0, low), ("straight", 12.0, med), ("straight", 8.0, low)],
        [("arc", 25.0, low), ("straight", 1.4, ext), ("straight", 10.0, low)],
        [("straight", 12.5, med), ("straight", 1.7, high), ("straight", 25.0, low)],
        [("straight", 17.3, low), ("straight", 12.0, med), ("arc", 11.0, low)],
    ]
    segs: list[Segment] = [stop]
    for b, block in enumerate(blocks):
        for kind, dur, s in block:
            yaw_rate = (0.05 if b % 2 == 0 else -0.05) if kind == "arc" else 0.0
            segs.append(Segment(kind, dur, speed, yaw_rate, s))
        segs.append(stop)
    return ScenarioSpec(segments=tuple(segs), seed=seed, **_nominal_biases())


def heading_scenario(seed: int = 0, duration: float = 600.0, speed: float = 0.5,
                     turn_slip: float = 0.2, gyro_bias_deg_s: float = 0.005) -> ScenarioSpec:
    """Square-ish loops with a stop every 40 s and slipping skid-steer turns.

    The gyro carries a turn-on bias of ``gyro_bias_deg_s`` on every axis, well
    above the in-run stability, so directly integrated heading drifts visibly.
    The filter runs with a matching initial bias sigma and a ZARU sigma sized to
    the simulated gyro white noise; with the generic 0.002 rad/s the 8 s stops
    are too short to calibrate the z-gyro.
    """
    turn_rate = 0.2
    turn_time = (math.pi / 2) / turn_rate
    cycle = [
        Segment("stop", 8.0),
        Segment("straight", 10.0, speed, 0.0, 0.1),
        Segment("arc", turn_time, speed, turn_rate, turn_slip),
        Segment("straight", 32.0 - 10.0 - turn_time, speed, 0.0, 0.05),
    ]
    n = int(round(duration / 40.0))
    bg = gyro_bias_deg_s * _DEG
    return ScenarioSpec(
        segments=tuple(cycle * n),
        seed=seed,
        accel_bias=(NOMINAL_ACCEL_BIAS, NOMINAL_ACCEL_BIAS, -NOMINAL_ACCEL_BIAS),
        gyro_bias=(bg, -bg, bg),
        filter_overrides={"init_sigma_bg_deg_h": gyro_bias_deg_s * 3600.0, "sigma_zaru_rad_s": 3e-4},
    )


def circle_scenario(seed: int = 0, duration: float = 60.0) -> ScenarioSpec:
    """Noise- and bias-free circular traverse for round-trip checks."""
    return ScenarioSpec(segments=(Segment("arc", duration, 0.8, 0.1, 0.0),), seed=seed, noise=None,
                        max_accel=0.8)


BUILTIN_SCENARIOS = {
    "toy-static": static_toy_scenario,
    "stop-and-go": stop_and_go_scenario,
    "heading": heading_scenario,
    "circle": circle_scenario,
}


# ---------------------------------------------------------------------------
# (de)serialisation

def scenario_to_dict(spec: ScenarioSpec) -> dict:
    d = {
        "imu_rate": spec.imu_rate,
        "wheel_rate": spec.wheel_rate,
        "start": {"lat_deg": math.degrees(spec.start.lat), "lon_deg": math.degrees(spec.start.lon),
                  "h": spec.start.h, "yaw_deg": math.degrees(spec.start_yaw)},
        "accel_bias": list(spec.accel_bias),
        "gyro_bias": list(spec.gyro_bias),
        "noise": None if spec.noise is None else asdict(spec.noise),
        "bias_random_walk": spec.bias_random_walk,
        "encoder_noise": spec.encoder_noise,
        "max_accel": spec.max_accel,
        "seed": spec.seed,
        "segments": [asdict(s) for s in spec.segments],
        "filter_overrides": dict(spec.filter_overrides),
    }
    if spec.schedule is not None:
        d["schedule"] = {
            "zero_update_times": list(spec.schedule.zero_update_times),
            "continuous_after": spec.schedule.continuous_after,
            "nhc_every_step": spec.schedule.nhc_every_step,
        }
    return d


def scenario_from_dict(d: Mapping[str, Any]) -> ScenarioSpec:
    try:
        start = d.get("start", {})
        noise = d.get("noise", {})
        sched = d.get("schedule")
        return ScenarioSpec(
            segments=tuple(Segment(**s) for s in d["segments"]),
            imu_rate=float(d.get("imu_rate", 50.0)),
            wheel_rate=float(d.get("wheel_rate", 10.0)),
            start=GeoPosition(math.radians(float(start.get("lat_deg", 39.74))),
                              math.radians(float(start.get("lon_deg", -79.9))), float(start.get("h", 300.0))),
            start_yaw=math.radians(float(start.get("yaw_deg", 0.0))),
            accel_bias=tuple(float(x) for x in d.get("accel_bias", (0.0, 0.0, 0.0))),
            gyro_bias=tuple(float(x) for x in d.get("gyro_bias", (0.0, 0.0, 0.0))),
            noise=None if noise is None else NoiseConfig(**noise),
            bias_random_walk=bool(d.get("bias_random_walk", False)),
            encoder_noise=float(d.get("encoder_noise", 0.0)),
            max_accel=float(d.get("max_accel", 0.8)),
            seed=int(d.get("seed", 0)),
            schedule=None if sched is None else UpdateSchedule(
                tuple(float(x) for x in sched.get("zero_update_times", ())),
                sched.get("continuous_after"), bool(sched.get("nhc_every_step", True))),
            filter_overrides=dict(d.get("filter_overrides", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario description: {exc}") from exc
