"""Pipeline configuration: flat YAML key/value files with per-key units.

Angles are given in degrees at the file boundary and converted to radians
internally. Noise terms are given in datasheet units and converted to PSDs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import DataError
from .eskf import NoiseConfig
from .geo import ELLIPSOIDS, EllipsoidModel, Euler, GeoPosition, euler_to_dcm
from .mechanization import NavState
from .pseudo import DetectorConfig, VehicleGeometry
from .slip import NEAR_ZERO_SPEED, NO_SLIP_BAND, SlipClass

_DEG = math.pi / 180.0
_G0 = 9.80665


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of a filter run. Field names are the config-file keys."""

    ellipsoid: str = "wgs84"
    # initial pose; roll and pitch start at zero (level start)
    init_lat_deg: float = 39.74
    init_lon_deg: float = -79.9
    init_h: float = 300.0  # m
    init_yaw_deg: float = 0.0
    init_vel_ned_m_s: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # sensor grade
    arw_deg_sqrt_h: float = 0.1
    vrw_m_s_sqrt_h: float = 0.008
    gyro_bias_stability_deg_h: float = 1.6
    accel_bias_stability_ug: float = 3.2
    bias_corr_time_s: float = 100.0
    # pseudo-measurement noise (1 sigma)
    sigma_zupt_m_s: float = 0.01
    sigma_zaru_rad_s: float = 0.002
    sigma_nhc_m_s: float = 0.05
    # initial uncertainty (1 sigma)
    init_sigma_att_deg: float = math.degrees(1e-4)
    init_sigma_vel_m_s: float = 0.01
    init_sigma_pos_m: float = 1.0
    init_sigma_ba_ug: float = 3.2
    init_sigma_bg_deg_h: float = 1.6
    # vehicle geometry
    wheel_radius: float = 0.12
    track_width: float = 0.685
    wheelbase: float = 0.544
    lever_arm: tuple[float, float, float] = (0.0, 0.3425, 0.0)
    # stationarity detector
    window_length_s: float = 0.5
    omega_stop_rad_s: float = 0.05
    sigma_a_m_s2: float = 0.005
    sigma_g_rad_s: float = 0.005
    wo_yaw_rate_max_rad_s: float = 0.01
    hysteresis: int = 2
    min_samples: int = 5
    # update switches and gates
    use_zupt: bool = True
    use_zaru: bool = True
    use_nhc: bool = True
    nhc_max_yaw_rate_rad_s: float = 0.3
    nhc_suspend_slip_class: str = "High"
    gate_probability: float | None = 0.999
    # known-stop schedule; when set it replaces the detector
    schedule_zero_update_times: tuple[float, ...] | None = None
    schedule_continuous_after: float | None = None
    # slip
    slip_no_slip_band: float = NO_SLIP_BAND
    slip_near_zero_m_s: float = NEAR_ZERO_SPEED
    # stream handling
    imu_max_gap_s: float = 0.1
    health_checks: bool = True
    output_dir: str | None = None

    def __post_init__(self):
        if self.ellipsoid not in ELLIPSOIDS:
            raise DataError(f"unknown ellipsoid {self.ellipsoid!r}; choose from {sorted(ELLIPSOIDS)}")
        if self.nhc_suspend_slip_class not in SlipClass.__members__:
            raise DataError(f"unknown slip class {self.nhc_suspend_slip_class!r}")
        if len(self.lever_arm) != 3:
            raise DataError("lever_arm needs three components")
        if len(self.init_vel_ned_m_s) != 3:
            raise DataError("init_vel_ned_m_s needs three components")
        if self.gate_probability is not None and not 0.0 < self.gate_probability < 1.0:
            raise DataError("gate_probability must lie in (0, 1)")
        if self.imu_max_gap_s <= 0:
            raise DataError("imu_max_gap_s must be positive")

    # -- derived objects -------------------------------------------------
    @property
    def model(self) -> EllipsoidModel:
        return ELLIPSOIDS[self.ellipsoid]

    @property
    def start(self) -> GeoPosition:
        return GeoPosition(self.init_lat_deg * _DEG, self.init_lon_deg * _DEG, self.init_h)

    def initial_nav(self, t0: float = 0.0) -> NavState:
        C = euler_to_dcm(Euler(0.0, 0.0, self.init_yaw_deg * _DEG))
        return NavState(C, np.array(self.init_vel_ned_m_s, dtype=float), self.start, t0)

    def noise(self) -> NoiseConfig:
        tc = self.bias_corr_time_s
        return NoiseConfig(
            s_rg=(self.arw_deg_sqrt_h * _DEG / 60.0) ** 2,
            s_ra=(self.vrw_m_s_sqrt_h / 60.0) ** 2,
            s_bgd=(self.gyro_bias_stability_deg_h * _DEG / 3600.0) ** 2 / tc,
            s_bad=(self.accel_bias_stability_ug * 1e-6 * _G0) ** 2 / tc,
            r_zupt=self.sigma_zupt_m_s**2,
            r_zaru=self.sigma_zaru_rad_s**2,
            r_nhc=self.sigma_nhc_m_s**2,
        )

    def initial_sigmas(self) -> dict[str, float]:
        return {
            "sigma_att": self.init_sigma_att_deg * _DEG,
            "sigma_vel": self.init_sigma_vel_m_s,
            "sigma_pos_h": self.init_sigma_pos_m,
            "sigma_pos_v": self.init_sigma_pos_m,
            "sigma_ba": self.init_sigma_ba_ug * 1e-6 * _G0,
            "sigma_bg": self.init_sigma_bg_deg_h * _DEG / 3600.0,
        }

    def geometry(self) -> VehicleGeometry:
        return VehicleGeometry(self.wheel_radius, self.track_width, self.wheelbase, tuple(self.lever_arm))

    def detector(self) -> DetectorConfig:
        return DetectorConfig(self.window_length_s, self.omega_stop_rad_s, self.sigma_a_m_s2, self.sigma_g_rad_s,
                              self.wo_yaw_rate_max_rad_s, self.hysteresis, self.min_samples)

    @property
    def nhc_suspend_class(self) -> SlipClass:
        return SlipClass[self.nhc_suspend_slip_class]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lever_arm"] = list(self.lever_arm)
        d["init_vel_ned_m_s"] = list(self.init_vel_ned_m_s)
        if self.schedule_zero_update_times is not None:
            d["schedule_zero_update_times"] = list(self.schedule_zero_update_times)
        return d


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def config_from_dict(d: Mapping[str, Any]) -> PipelineConfig:
    unknown = sorted(set(d) - set(_FIELDS))
    if unknown:
        raise DataError(f"unknown config keys: {', '.join(unknown)}")
    kw = dict(d)
    for key in ("lever_arm", "init_vel_ned_m_s"):
        if key in kw:
            kw[key] = tuple(float(x) for x in kw[key])
    if kw.get("schedule_zero_update_times") is not None:
        kw["schedule_zero_update_times"] = tuple(float(x) for x in kw["schedule_zero_update_times"])
    try:
        return PipelineConfig(**kw)
    except TypeError as exc:
        raise DataError(f"invalid config: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected a mapping of keys to values")
    return config_from_dict(data)


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False), encoding="utf-8")


def with_overrides(cfg: PipelineConfig, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    if not overrides:
        return cfg
    return config_from_dict({**cfg.to_dict(), **dict(overrides)})
