"""15-state error-state extended Kalman filter.

Error-state layout (indices)::

    0:3   attitude error (rad, NED)
    3:6   velocity error (m/s, NED)
    6:9   position error (lat rad, lon rad, height m)
    9:12  residual accelerometer bias (m/s^2)
    12:15 residual gyro bias (rad/s)

Navigation errors are *estimate minus truth*; the bias states are residual
sensor errors (what the compensated sensor still reads above truth). This is
the convention under which the pseudo-measurement matrices in
:mod:`slipnav.pseudo` are consistent, and corrections are therefore
subtracted from the navigation state and added to the bias estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import GimbalLockError, NumericalHealthError, SingularUpdateError
from .geo import (
    WGS84,
    EllipsoidModel,
    GeoPosition,
    check_latitude,
    earth_rate_nav,
    floats3,
    geocentric_radius,
    orthonormalize,
    radii_of_curvature,
    skew,
    surface_gravity,
    transport_rate,
)
from .mechanization import NavState

N_STATES = 15
ATT, VEL, POS, BA, BG = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12), slice(12, 15)

SYMMETRY_TOL = 1e-12
PSD_REL_TOL = 1e-9
MAX_CONDITION = 1e14

_DEG = math.pi / 180.0
_I3 = np.eye(3)
_I15 = np.eye(N_STATES)
_G0 = 9.80665


@dataclass(frozen=True)
class NoiseConfig:
    """Process-noise PSDs and pseudo-measurement noise variances.

    Defaults correspond to a tactical-grade MEMS unit with 0.1 deg/sqrt(h)
    angle random walk, 0.008 m/s/sqrt(h) velocity random walk, 1.6 deg/h and
    3.2 micro-g in-run bias stability (bias PSDs assume a 100 s correlation time).
    """

    s_rg: float = (0.1 * _DEG / 60.0) ** 2  # rad^2/s
    s_ra: float = (0.008 / 60.0) ** 2  # m^2/s^3
    s_bgd: float = (1.6 * _DEG / 3600.0) ** 2 / 100.0  # rad^2/s^3
    s_bad: float = (3.2e-6 * _G0) ** 2 / 100.0  # m^2/s^5
    r_zupt: float = 0.01**2  # (m/s)^2
    r_zaru: float = 0.002**2  # (rad/s)^2
    r_nhc: float = 0.05**2  # (m/s)^2

    def __post_init__(self):
        for name in ("s_rg", "s_ra", "s_bgd", "s_bad", "r_zupt", "r_zaru", "r_nhc"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ErrorFilterState:
    dx: np.ndarray
    P: np.ndarray
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class InnovationReport:
    innovation: np.ndarray
    S: np.ndarray
    nis: float
    gate: float | None
    accepted: bool


def initial_covariance(p: GeoPosition, model: EllipsoidModel = WGS84, *, sigma_att=1e-4, sigma_vel=0.01,
                       sigma_pos_h=1.0, sigma_pos_v=1.0, sigma_ba=3.2e-6 * _G0,
                       sigma_bg=1.6 * _DEG / 3600.0) -> np.ndarray:
    """Diagonal initial covariance; horizontal position sigma is converted to radians."""
    r_n, r_e = radii_of_curvature(p.lat, model)
    d = np.empty(N_STATES)
    d[ATT] = sigma_att**2
    d[VEL] = sigma_vel**2
    d[POS] = [
        (sigma_pos_h / (r_n + p.h)) ** 2,
        (sigma_pos_h / ((r_e + p.h) * math.cos(p.lat))) ** 2,
        sigma_pos_v**2,
    ]
    d[BA] = sigma_ba**2
    d[BG] = sigma_bg**2
    return np.diag(d)


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def check_covariance(P: np.ndarray) -> None:
    """Raise :class:`NumericalHealthError` unless P is finite, symmetric and PSD within tolerance.

    PSD is tested as ``min eig(P) >= -PSD_REL_TOL * trace(P)`` via a Cholesky
    factorisation of the correspondingly shifted matrix.
    """
    if not math.isfinite(P.sum()):
        raise NumericalHealthError("covariance contains non-finite values")
    asym = abs(P - P.T).max()
    if asym > SYMMETRY_TOL:
        raise NumericalHealthError(f"covariance asymmetry {asym:.3e}")
    tr = P.trace()
    shift = PSD_REL_TOL * abs(tr)
    try:
        np.linalg.cholesky(P + shift * (_I15 if P.shape[0] == N_STATES else np.eye(P.shape[0])))
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(P).min()
        raise NumericalHealthError(f"covariance not PSD: min eigenvalue {lam:.3e}, trace {tr:.3e}") from None


def system_matrix(nav: NavState, f_ib_b, model: EllipsoidModel = WGS84) -> np.ndarray:
    """Continuous-time error-state Jacobian F (15 x 15)."""
    lat, h = nav.p.lat, nav.p.h
    check_latitude(lat)
    vn, ve, vd = floats3(nav.v_eb_n)
    C = nav.C_b_n
    r_n, r_e = radii_of_curvature(lat, model)
    rn, re = r_n + h, r_e + h
    w = model.rotation_rate
    sl, cl = math.sin(lat), math.cos(lat)
    tl = sl / cl
    sec2 = 1.0 / cl**2

    # navigation-error part (rows/cols attitude, velocity, position) as one 9 x 9 literal
    wi = (earth_rate_nav(lat, model) + transport_rate(nav.p, nav.v_eb_n, model)).tolist()
    fx, fy, fz = (C @ f_ib_b).tolist()
    g0 = surface_gravity(lat, model)
    r_es = geocentric_radius(lat, model)
    nav_block = [
        # attitude rows: -[w_in x] | velocity | position
        [0.0, wi[2], -wi[1], 0.0, -1.0 / re, 0.0, w * sl, 0.0, ve / re**2],
        [-wi[2], 0.0, wi[0], 1.0 / rn, 0.0, 0.0, 0.0, 0.0, -vn / rn**2],
        [wi[1], -wi[0], 0.0, 0.0, tl / re, 0.0, w * cl + ve * sec2 / re, 0.0, -ve * tl / re**2],
        # velocity rows: -[(C f) x] | velocity | position
        [0.0, fz, -fy, vd / rn, -2.0 * ve * tl / re - 2.0 * w * sl, vn / rn,
         -ve**2 * sec2 / re - 2.0 * ve * w * cl, 0.0, ve**2 * tl / re**2 - vn * vd / rn**2],
        [-fz, 0.0, fx, ve * tl / re + 2.0 * w * sl, (vn * tl + vd) / re, ve / re + 2.0 * w * cl,
         vn * ve * sec2 / re + 2.0 * vn * w * cl - 2.0 * vd * w * sl, 0.0, -(vn * ve * tl + ve * vd) / re**2],
        [fy, -fx, 0.0, -2.0 * vn / rn, -2.0 * ve / re - 2.0 * w * cl, 0.0,
         2.0 * ve * w * sl, 0.0, ve**2 / re**2 + vn**2 / rn**2 - 2.0 * g0 / r_es],
        # position rows
        [0.0, 0.0, 0.0, 1.0 / rn, 0.0, 0.0, 0.0, 0.0, -vn / rn**2],
        [0.0, 0.0, 0.0, 0.0, 1.0 / (re * cl), 0.0, ve * sl * sec2 / re, 0.0, -ve / (re**2 * cl)],
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
    ]
    F = np.zeros((N_STATES, N_STATES))
    F[:9, :9] = nav_block
    F[ATT, BG] = C
    F[VEL, BA] = C
    return F


def discretize(F: np.ndarray, tau: float) -> np.ndarray:
    """First-order state transition matrix ``I + F tau``."""
    return (_I15 if F.shape[0] == N_STATES else np.eye(F.shape[0])) + F * tau


def process_noise(nav: NavState, noise: NoiseConfig, F21: np.ndarray, tau: float,
                  model: EllipsoidModel = WGS84) -> np.ndarray:
    """Discrete system noise covariance Q over one propagation interval."""
    C = nav.C_b_n
    r_n, r_e = radii_of_curvature(nav.p.lat, model)
    # T maps NED velocity to curvilinear position rates; it is diagonal
    d = np.array([1.0 / (r_n + nav.p.h), 1.0 / ((r_e + nav.p.h) * math.cos(nav.p.lat)), -1.0])
    dc = d[:, None]
    s_rg, s_ra, s_bgd, s_bad = noise.s_rg, noise.s_ra, noise.s_bgd, noise.s_bad
    t1 = tau
    t2 = t1 * tau
    t3 = t2 * tau
    t4 = t3 * tau
    t5 = t4 * tau
    t6 = t5 * tau
    t7 = t6 * tau
    FF = F21 @ F21.T
    F21C = F21 @ C
    TF21 = dc * F21
    TFF = dc * FF

    # lower block triangle only; diagonal blocks at half weight so that L + L^T is Q
    L = np.zeros((N_STATES, N_STATES))
    L[ATT, ATT] = (0.5 * (s_rg * t1 + s_bgd * t3 / 3.0)) * _I3
    L[VEL, ATT] = (s_rg * t2 / 2.0 + s_bgd * t4 / 4.0) * F21
    L[VEL, VEL] = (0.5 * (s_ra * t1 + s_bad * t3 / 3.0)) * _I3 + (0.5 * (s_rg * t3 / 3.0 + s_bgd * t5 / 5.0)) * FF
    L[POS, ATT] = (s_rg * t3 / 3.0 + s_bgd * t5 / 5.0) * TF21
    L[POS, VEL] = np.diag((s_ra * t2 / 2.0 + s_bad * t4 / 4.0) * d) + (s_rg * t4 / 4.0 + s_bgd * t6 / 6.0) * TFF
    L[POS, POS] = (np.diag((0.5 * (s_ra * t3 / 3.0 + s_bad * t5 / 5.0)) * d * d)
                   + (0.5 * (s_rg * t5 / 5.0 + s_bgd * t7 / 7.0)) * TFF * d)
    L[BA, VEL] = (0.5 * s_bad * t2) * C.T
    L[BA, POS] = (s_bad * t3 / 3.0) * C.T * d
    L[BA, BA] = (0.5 * s_bad * t1) * _I3
    L[BG, ATT] = (0.5 * s_bgd * t2) * C.T
    L[BG, VEL] = (s_bgd * t3 / 3.0) * F21C.T
    L[BG, POS] = (s_bgd * t4 / 4.0) * F21C.T * d
    L[BG, BG] = (0.5 * s_bgd * t1) * _I3
    return L + L.T


def propagate(efs: ErrorFilterState, Phi: np.ndarray, Q: np.ndarray, check: bool = True) -> ErrorFilterState:
    P = symmetrize(Phi @ efs.P @ Phi.T + Q)
    if check:
        check_covariance(P)
    return ErrorFilterState(Phi @ efs.dx, P, efs.b_a, efs.b_g)


@dataclass(frozen=True)
class Measurement:
    """One pseudo-measurement block: innovation ``dz``, Jacobian ``H``, noise ``R``, optional NIS gate."""

    dz: np.ndarray
    H: np.ndarray
    R: np.ndarray
    gate: float | None = None
    name: str = ""


def update(efs: ErrorFilterState, H: np.ndarray, R: np.ndarray, dz: np.ndarray, gate: float | None = None,
           check: bool = True) -> tuple[ErrorFilterState, InnovationReport]:
    """Kalman measurement update with an optional chi-square innovation gate.

    ``gate`` is the NIS threshold. A gated measurement leaves ``efs`` unchanged
    and is reported with ``accepted=False``.
    """
    m = Measurement(np.atleast_1d(np.asarray(dz, dtype=float)), np.atleast_2d(H), np.atleast_2d(R), gate)
    efs, reports = update_blocks(efs, [m], check)
    return efs, reports[0]


def _inverse(S: np.ndarray) -> np.ndarray:
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        raise SingularUpdateError("innovation covariance is singular") from None
    # 1-norm condition number; cheaper than the SVD-based estimate
    cond = abs(S).sum(axis=0).max() * abs(S_inv).sum(axis=0).max()
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularUpdateError(f"innovation covariance is singular (condition {cond:.3e})")
    return S_inv


def update_blocks(efs: ErrorFilterState, blocks, check: bool = True) -> tuple[ErrorFilterState, list[InnovationReport]]:
    """Joint update with several independent measurement blocks.

    Each block is gated on its own NIS against the prior; the accepted blocks
    are then applied as one stacked update (equivalent to applying them in
    sequence, since their noises are uncorrelated).
    """
    blocks = list(blocks)
    if not blocks:
        return efs, []
    if len(blocks) == 1:
        dz, H, R = blocks[0].dz, blocks[0].H, blocks[0].R
    else:
        dz = np.concatenate([b.dz for b in blocks])
        H = np.vstack([b.H for b in blocks])
        R = np.zeros((len(dz), len(dz)))
        o = 0
        for b in blocks:
            m = len(b.dz)
            R[o:o + m, o:o + m] = b.R
            o += m
    if not math.isfinite(dz.sum()):
        raise NumericalHealthError("non-finite innovation")
    P = efs.P
    nu = dz - H @ efs.dx
    PHt = P @ H.T
    S = H @ PHt + R
    S_inv = _inverse(S)

    reports = []
    keep = []
    o = 0
    for b in blocks:
        m = len(b.dz)
        sl_b = slice(o, o + m)
        nu_b, S_b = nu[sl_b], S[sl_b, sl_b]
        if len(blocks) == 1:
            nis = float(nu_b @ S_inv @ nu_b)
        else:
            nis = float(nu_b @ np.linalg.solve(S_b, nu_b))
        ok = b.gate is None or nis <= b.gate
        reports.append(InnovationReport(nu_b, S_b, nis, b.gate, ok))
        if ok:
            keep.extend(range(o, o + m))
        o += m
    if not keep:
        return efs, reports
    if len(keep) < len(dz):
        idx = np.array(keep)
        H, R, nu, PHt = H[idx], R[np.ix_(idx, idx)], nu[idx], PHt[:, idx]
        S_inv = _inverse(S[np.ix_(idx, idx)])

    K = PHt @ S_inv
    dx = efs.dx + K @ nu
    IKH = _I15 - K @ H
    # Joseph form: equals (I - KH) P for the optimal gain, better conditioned
    P_new = symmetrize(IKH @ P @ IKH.T + K @ R @ K.T)
    if check:
        check_covariance(P_new)
    return ErrorFilterState(dx, P_new, efs.b_a, efs.b_g), reports


def chi2_gate(dof: int, probability: float = 0.999) -> float:
    return float(chi2.ppf(probability, dof))


def correct_state(nav: NavState, efs: ErrorFilterState) -> tuple[NavState, ErrorFilterState]:
    """Fold the error estimate into the total state and reset the navigation error states.

    Bias components are accumulated into ``b_a``/``b_g`` and also reset to zero.
    """
    dx = efs.dx
    if not math.isfinite(dx.sum()):
        raise NumericalHealthError("non-finite error state")
    C = orthonormalize((_I3 - skew(dx[ATT])) @ nav.C_b_n)
    if abs(C[2, 0]) >= 1.0 - 1e-12:
        raise GimbalLockError("corrected pitch reached +/-90 deg")
    v = nav.v_eb_n - dx[VEL]
    p = GeoPosition(nav.p.lat - dx[6], nav.p.lon - dx[7], nav.p.h - dx[8])
    corrected = NavState(C, v, p, nav.t)
    reset = ErrorFilterState(np.zeros(N_STATES), efs.P, efs.b_a + dx[BA], efs.b_g + dx[BG])
    return corrected, reset
