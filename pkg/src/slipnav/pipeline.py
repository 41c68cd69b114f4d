"""Filter execution: mechanization + error-state filter + pseudo-measurements + slip detection.

Also hosts the two baseline estimators (free INS and wheel dead reckoning) and
the static toy protocol comparing INS-only, zero updates, and zero updates
with non-holonomic constraints.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import PipelineConfig, with_overrides
from .errors import NumericalHealthError
from .eskf import (
    ATT,
    VEL,
    ErrorFilterState,
    check_covariance,
    chi2_gate,
    correct_state,
    discretize,
    initial_covariance,
    Measurement,
    process_noise,
    propagate,
    system_matrix,
    update_blocks,
)
from .geo import GeoPosition, dcm_to_euler, enu_from_geodetic, orthonormality_error
from .io import Trajectory
from .mechanization import ImuSample, NavState, mechanize_step, position_update
from .pseudo import StationarityDetector, nhc_measurement, wheel_yaw_rate, zaru_measurement, zupt_measurement
from .sim import ScenarioSpec, TruthLog, UpdateSchedule, simulate, static_toy_scenario
from .slip import SlipClass, SlipRecord, WheelSample, make_record

log = logging.getLogger(__name__)

ORTHO_LIMIT = 1e-9
EIG_CHECK_EVERY = 50  # epochs between full eigenvalue audits of P


@dataclass
class HealthStats:
    """Running record of the filter's numerical health."""

    covariance_checks: int = 0
    eigen_audits: int = 0
    max_asymmetry: float = 0.0
    min_eig_ratio: float = math.inf  # min eigenvalue / trace over audits
    max_ortho_error: float = 0.0
    violations: int = 0

    def audit(self, P: np.ndarray) -> None:
        self.eigen_audits += 1
        self.max_asymmetry = max(self.max_asymmetry, float(np.max(np.abs(P - P.T))))
        lam = float(np.linalg.eigvalsh(P)[0])
        tr = float(np.trace(P))
        self.min_eig_ratio = min(self.min_eig_ratio, lam / tr)
        if self.max_asymmetry > 1e-12 or lam < -1e-9 * tr:
            self.violations += 1

    def dcm(self, C: np.ndarray) -> None:
        e = orthonormality_error(C)
        if e > self.max_ortho_error:
            self.max_ortho_error = e
        if e > ORTHO_LIMIT:
            self.violations += 1

    def to_dict(self) -> dict:
        return {
            "covariance_checks": self.covariance_checks,
            "eigen_audits": self.eigen_audits,
            "max_asymmetry": self.max_asymmetry,
            "min_eig_ratio": None if math.isinf(self.min_eig_ratio) else self.min_eig_ratio,
            "max_ortho_error": self.max_ortho_error,
            "violations": self.violations,
        }


@dataclass
class FilterRun:
    trajectory: Trajectory
    slip: list[SlipRecord]
    health: HealthStats
    counts: dict = field(default_factory=dict)
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    P: np.ndarray | None = None
    runtime_s: float = 0.0


class _TrajectoryBuffer:
    def __init__(self, n: int):
        self.t = np.empty(n)
        self.lat, self.lon, self.h = np.empty(n), np.empty(n), np.empty(n)
        self.v = np.empty((n, 3))
        self.att = np.empty((n, 3))
        self.k = 0

    def add(self, nav: NavState) -> None:
        k = self.k
        self.t[k] = nav.t
        self.lat[k], self.lon[k], self.h[k] = nav.p
        self.v[k] = nav.v_eb_n
        self.att[k] = dcm_to_euler(nav.C_b_n)
        self.k += 1

    def build(self) -> Trajectory:
        k = self.k
        return Trajectory(self.t[:k].copy(), self.lat[:k].copy(), self.lon[:k].copy(), self.h[:k].copy(),
                          self.v[:k].copy(), self.att[:k, 0].copy(), self.att[:k, 1].copy(),
                          np.unwrap(self.att[:k, 2]))


def _schedule(cfg: PipelineConfig) -> UpdateSchedule | None:
    if cfg.schedule_zero_update_times is None and cfg.schedule_continuous_after is None:
        return None
    return UpdateSchedule(tuple(cfg.schedule_zero_update_times or ()), cfg.schedule_continuous_after)


def run_filter(cfg: PipelineConfig, imu: Sequence[ImuSample], wheels: Sequence[WheelSample] = (),
               initial: NavState | None = None) -> FilterRun:
    """Run the integrated filter over an IMU stream and an encoder stream.

    The first IMU sample defines the start epoch and is not integrated.
    Zero-velocity and zero-angular-rate updates are driven by the
    stationarity detector, or by the configured schedule when one is given.
    Non-holonomic constraints are applied at every epoch unless the vehicle is
    turning fast or, with the wheels rolling, the latest slip class reaches
    ``nhc_suspend_slip_class``.

    Raises
    ------
    NumericalHealthError
        If the covariance stops being symmetric positive semi-definite; the
        message names the epoch.
    """
    if not imu:
        raise ValueError("empty IMU stream")
    t_start = time.perf_counter()
    model = cfg.model
    noise = cfg.noise()
    geom = cfg.geometry()
    nav = initial if initial is not None else cfg.initial_nav(imu[0].t)
    nav = replace(nav, t=imu[0].t)
    efs = ErrorFilterState(np.zeros(15), initial_covariance(nav.p, model, **cfg.initial_sigmas()))
    detector = StationarityDetector(cfg.detector(), geom)
    schedule = _schedule(cfg)
    check = cfg.health_checks
    gate3 = chi2_gate(3, cfg.gate_probability) if cfg.gate_probability else None
    gate2 = chi2_gate(2, cfg.gate_probability) if cfg.gate_probability else None
    R_zupt = noise.r_zupt * np.eye(3)
    R_zaru = noise.r_zaru * np.eye(3)
    R_nhc = noise.r_nhc * np.eye(2)
    suspend_cls = cfg.nhc_suspend_class

    buf = _TrajectoryBuffer(len(imu))
    health = HealthStats()
    counts = {"zupt": 0, "zaru": 0, "nhc": 0, "gated": 0, "nhc_suspended": 0}
    records: list[SlipRecord] = []
    last_cls = SlipClass.NoSlip
    last_rolling = False
    j = 0
    n_wheels = len(wheels)

    def emit_slip(upto: float):
        nonlocal j, last_cls, last_rolling
        while j < n_wheels and wheels[j].t <= upto:
            rec = make_record(wheels[j].t, nav, wheels[j], geom, cfg.slip_no_slip_band, cfg.slip_near_zero_m_s)
            records.append(rec)
            last_cls = rec.cls
            last_rolling = abs(rec.r_omega) >= cfg.slip_near_zero_m_s
            j += 1

    buf.add(nav)
    health.dcm(nav.C_b_n)
    for ws in wheels:
        if ws.t > imu[0].t:
            break
        detector.add_wheel(ws)
    detector.add_imu(imu[0])
    emit_slip(imu[0].t)
    jd = j  # next wheel sample to feed the detector

    for k in range(1, len(imu)):
        raw = imu[k]
        t = raw.t
        try:
            comp = ImuSample(t, raw.f_ib_b - efs.b_a, raw.w_ib_b - efs.b_g)
            prev = nav
            nav = mechanize_step(prev, comp, model, cfg.imu_max_gap_s)
            tau = t - prev.t
            F = system_matrix(prev, comp.f_ib_b, model)
            Q = process_noise(prev, noise, F[VEL, ATT], tau, model)
            efs = propagate(efs, discretize(F, tau), Q, check=False)

            if schedule is not None:
                zu = zaru = schedule.zero_update_at(t)
            else:
                while jd < n_wheels and wheels[jd].t <= t:
                    detector.add_wheel(wheels[jd])
                    jd += 1
                verdict = detector.add_imu(raw)
                zu, zaru = verdict.is_zero_velocity, verdict.is_zero_angular_rate

            # all pseudo-measurements of an epoch are gated individually against
            # the prior, then applied as one stacked update
            blocks = []
            if zu and cfg.use_zupt:
                dz, H = zupt_measurement(nav)
                blocks.append(Measurement(dz, H, R_zupt, gate3, "zupt"))
            if zaru and cfg.use_zaru:
                dz, H = zaru_measurement(raw, efs, nav, model)
                blocks.append(Measurement(dz, H, R_zaru, gate3, "zaru"))
            if cfg.use_nhc:
                # with the wheels at rest a large slip estimate reflects filter drift, not wheel slip
                if abs(comp.w_ib_b[2]) > cfg.nhc_max_yaw_rate_rad_s or (last_rolling and last_cls >= suspend_cls):
                    counts["nhc_suspended"] += 1
                else:
                    dz, H = nhc_measurement(nav, comp, geom)
                    blocks.append(Measurement(dz, H, R_nhc, gate2, "nhc"))
            if blocks:
                efs, reports = update_blocks(efs, blocks, check=False)
                for blk, rep in zip(blocks, reports):
                    counts[blk.name if rep.accepted else "gated"] += 1
                if any(rep.accepted for rep in reports):
                    nav, efs = correct_state(nav, efs)
            if check:
                # one audit per epoch covers the propagation and every update
                check_covariance(efs.P)
        except NumericalHealthError as exc:
            raise type(exc)(f"epoch {k} (t={t}): {exc}") from exc

        if check:
            health.covariance_checks += 1
            health.dcm(nav.C_b_n)
            if k % EIG_CHECK_EVERY == 0:
                health.audit(efs.P)
        buf.add(nav)
        emit_slip(t)

    if check:
        health.audit(efs.P)
    # encoder samples after the last IMU epoch are held at the final state
    emit_slip(math.inf)
    log.debug("filter run: %s", counts)
    return FilterRun(buf.build(), records, health, counts, efs.b_a.copy(), efs.b_g.copy(), efs.P.copy(),
                     time.perf_counter() - t_start)


# ---------------------------------------------------------------------------
# baselines

def run_direct(cfg: PipelineConfig, imu: Sequence[ImuSample], initial: NavState | None = None) -> Trajectory:
    """Free-running mechanization of the raw IMU stream (no updates, no bias compensation)."""
    model = cfg.model
    nav = initial if initial is not None else cfg.initial_nav(imu[0].t)
    nav = replace(nav, t=imu[0].t)
    buf = _TrajectoryBuffer(len(imu))
    buf.add(nav)
    for s in imu[1:]:
        nav = mechanize_step(nav, s, model, cfg.imu_max_gap_s)
        buf.add(nav)
    return buf.build()


def run_wheel_odometry(cfg: PipelineConfig, wheels: Sequence[WheelSample], imu: Sequence[ImuSample] = (),
                       initial: NavState | None = None, heading_source: str = "wheels") -> Trajectory:
    """Differential-drive dead reckoning on the encoder stream.

    Speed is the mean rolling speed of the four wheels. Heading is integrated
    from the left/right rate difference (``heading_source="wheels"``) or from
    the raw body z-gyro (``"gyro"``).
    """
    if heading_source not in ("wheels", "gyro"):
        raise ValueError("heading_source must be 'wheels' or 'gyro'")
    if not wheels:
        raise ValueError("empty wheel stream")
    model = cfg.model
    geom = cfg.geometry()
    nav = initial if initial is not None else cfg.initial_nav(wheels[0].t)
    yaw = dcm_to_euler(nav.C_b_n).yaw
    p = nav.p
    if heading_source == "gyro":
        t_imu = np.array([s.t for s in imu])
        wz = np.array([s.w_ib_b[2] for s in imu])
    n = len(wheels)
    out_t = np.empty(n)
    lat, lon, h = np.empty(n), np.empty(n), np.empty(n)
    v = np.zeros((n, 3))
    yaws = np.empty(n)

    def speed(ws):
        return geom.wheel_radius * float(np.mean(ws.rates))

    v_prev = np.array([speed(wheels[0]) * math.cos(yaw), speed(wheels[0]) * math.sin(yaw), 0.0])
    out_t[0], (lat[0], lon[0], h[0]), v[0], yaws[0] = wheels[0].t, p, v_prev, yaw
    for i in range(1, n):
        tau = wheels[i].t - wheels[i - 1].t
        if heading_source == "wheels":
            rate = 0.5 * (wheel_yaw_rate(wheels[i - 1].rates, geom) + wheel_yaw_rate(wheels[i].rates, geom))
            yaw += rate * tau
        else:
            sel = (t_imu > wheels[i - 1].t) & (t_imu <= wheels[i].t)
            if np.any(sel):
                yaw += float(np.sum(wz[sel])) * tau / int(np.sum(sel))
        u = speed(wheels[i])
        v_cur = np.array([u * math.cos(yaw), u * math.sin(yaw), 0.0])
        p = position_update(p, v_prev, v_cur, tau, model)
        v_prev = v_cur
        out_t[i], (lat[i], lon[i], h[i]), v[i], yaws[i] = wheels[i].t, p, v_cur, yaw
    zeros = np.zeros(n)
    return Trajectory(out_t, lat, lon, h, v, zeros, zeros.copy(), yaws)


@dataclass
class ComparatorRuns:
    direct: Trajectory
    wheel_odometry: Trajectory


def run_comparators(cfg: PipelineConfig, imu: Sequence[ImuSample], wheels: Sequence[WheelSample],
                    initial: NavState | None = None) -> ComparatorRuns:
    return ComparatorRuns(run_direct(cfg, imu, initial), run_wheel_odometry(cfg, wheels, imu, initial))


# ---------------------------------------------------------------------------
# scenario helpers

def config_for_scenario(spec: ScenarioSpec, base: PipelineConfig | None = None) -> PipelineConfig:
    """Pipeline config whose start pose and schedule follow a simulated scenario."""
    base = base or PipelineConfig()
    over = {
        "init_lat_deg": math.degrees(spec.start.lat),
        "init_lon_deg": math.degrees(spec.start.lon),
        "init_h": spec.start.h,
        "init_yaw_deg": math.degrees(spec.start_yaw),
    }
    if spec.schedule is not None:
        over["schedule_zero_update_times"] = list(spec.schedule.zero_update_times)
        over["schedule_continuous_after"] = spec.schedule.continuous_after
    over.update(spec.filter_overrides)
    return with_overrides(base, over)


def position_error_3d(traj: Trajectory, truth: TruthLog, k: int = -1) -> float:
    """Straight-line distance between estimate and truth at sample ``k`` (same epochs)."""
    origin = GeoPosition(float(truth.lat[k]), float(truth.lon[k]), float(truth.h[k]))
    d = enu_from_geodetic(traj.lat[k], traj.lon[k], traj.h[k], origin)
    return float(np.linalg.norm(d))


@dataclass
class ToyResult:
    seed: int
    errors: dict[str, float]  # final 3-D position error per mode
    health: dict[str, HealthStats]
    runtime_s: float

    @property
    def ordering_holds(self) -> bool:
        e = self.errors
        return e["ZU+NH"] < e["ZU"] < e["INS-only"]

    @property
    def ratio(self) -> float:
        return self.errors["ZU+NH"] / self.errors["INS-only"]

    @property
    def passed(self) -> bool:
        return self.ordering_holds and self.ratio <= 0.01

    def verdict(self) -> str:
        order = sorted(self.errors, key=self.errors.get)
        return " < ".join(order)


def run_toy_static(seed: int = 0, base: PipelineConfig | None = None) -> ToyResult:
    """Static 300 s protocol: INS-only vs scheduled zero updates vs zero updates plus NHC."""
    t0 = time.perf_counter()
    spec = static_toy_scenario(seed)
    truth, imu, wheels = simulate(spec)
    cfg = config_for_scenario(spec, base)
    initial = truth.nav(0)
    ins = run_direct(cfg, imu, initial)
    zu = run_filter(with_overrides(cfg, {"use_nhc": False}), imu, wheels, initial)
    zunh = run_filter(with_overrides(cfg, {"use_nhc": True}), imu, wheels, initial)
    errors = {
        "INS-only": position_error_3d(ins, truth),
        "ZU": position_error_3d(zu.trajectory, truth),
        "ZU+NH": position_error_3d(zunh.trajectory, truth),
    }
    return ToyResult(seed, errors, {"ZU": zu.health, "ZU+NH": zunh.health}, time.perf_counter() - t0)
