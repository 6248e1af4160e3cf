"""Satellite-to-ground channels, UPA steering vectors and sensing matrices."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .errors import ConfigurationError
from .geometry import target_angles, target_angles_batch

SPEED_OF_LIGHT = 3.0e8
BOLTZMANN = 1.38e-23


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ArrayGeometry:
    nx: int = 4
    nz: int = 4
    spacing_over_wavelength: float = 0.5
    wavelength_m: float = SPEED_OF_LIGHT / 35e9

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ConfigurationError("array dimensions must be >= 1")
        if self.spacing_over_wavelength <= 0:
            raise ConfigurationError("element spacing must be positive")

    @property
    def n(self) -> int:
        return self.nx * self.nz

    @property
    def index_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(i_x, i_z) per element in Kronecker order a_x (x) a_z."""
        ix, iz = np.meshgrid(np.arange(self.nx), np.arange(self.nz), indexing="ij")
        return ix.ravel().astype(float), iz.ravel().astype(float)


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget parameters in linear units (see :meth:`from_table`)."""
    rician_factor_linear: float = 10.0
    carrier_hz: float = 35e9
    bandwidth_hz: float = 20e6
    g_over_t_linear: float = float(db_to_lin(34.0))
    boltzmann: float = BOLTZMANN
    noise_power_dbm: float = -110.0
    rain_mu_db: float = -2.6
    rain_sigma2_db: float = 1.63
    rain_model: str = "db"
    rain_enabled: bool = True
    antenna_max_gain_linear: float = float(db_to_lin(16.0))
    half_power_angle_deg: float = 0.4
    pattern_exponent: int = 2
    speed_of_light: float = SPEED_OF_LIGHT
    distance_band_km: tuple[float, float] = (550.0, 2700.0)

    def __post_init__(self):
        if self.rician_factor_linear < 0:
            raise ConfigurationError("Rician factor must be >= 0")
        for name in ("carrier_hz", "bandwidth_hz", "g_over_t_linear", "boltzmann",
                     "antenna_max_gain_linear", "half_power_angle_deg", "speed_of_light"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.pattern_exponent < 1:
            raise ConfigurationError("pattern_exponent must be >= 1")
        if self.rain_model not in ("db", "ln"):
            raise ConfigurationError("rain_model must be 'db' or 'ln'")

    @classmethod
    def from_table(cls, rician_factor_db=10.0, carrier_hz=35e9, bandwidth_hz=20e6,
                   g_over_t_db_per_k=34.0, antenna_max_gain_dbi=16.0, **kw) -> "ChannelParams":
        return cls(rician_factor_linear=float(db_to_lin(rician_factor_db)), carrier_hz=carrier_hz,
                   bandwidth_hz=bandwidth_hz, g_over_t_linear=float(db_to_lin(g_over_t_db_per_k)),
                   antenna_max_gain_linear=float(db_to_lin(antenna_max_gain_dbi)), **kw)

    @property
    def wavelength_m(self) -> float:
        return self.speed_of_light / self.carrier_hz

    @property
    def noise_power_w(self) -> float:
        return float(dbm_to_watt(self.noise_power_dbm))


@dataclass
class ChannelRealization:
    h: np.ndarray
    gain: np.ndarray
    los: np.ndarray
    nlos: np.ndarray
    rain: np.ndarray
    antenna_gain: np.ndarray
    distance_km: float
    warnings: list = field(default_factory=list)


@dataclass(frozen=True)
class SensingGains:
    beta: np.ndarray  # beta[k, u]: transmitter k -> target -> receiver u

    @classmethod
    def unit(cls, k: int) -> "SensingGains":
        return cls(np.ones((k, k), dtype=complex))

    @classmethod
    def two_hop(cls, positions_km: np.ndarray, target_km, wavelength_m: float) -> "SensingGains":
        """Free-space two-hop amplitude sqrt(lambda^2 / ((4 pi)^3 d_kp^2 d_pu^2))."""
        d = np.linalg.norm(np.asarray(positions_km) - np.asarray(target_km), axis=1) * 1e3
        power = wavelength_m ** 2 / ((4 * np.pi) ** 3 * np.outer(d ** 2, d ** 2))
        return cls(np.sqrt(power).astype(complex))


def steering_vector(theta, phi, arr: ArrayGeometry) -> np.ndarray:
    """UPA response, unit norm; broadcasts over angle arrays (last axis = element)."""
    ix, iz = arr.index_grid
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    k = 2 * np.pi * arr.spacing_over_wavelength
    phase = k * (ix * np.cos(phi) * np.sin(theta) + iz * np.cos(theta))
    return np.exp(1j * phase) / math.sqrt(arr.n)


def steering_phase_derivatives(theta, phi, arr: ArrayGeometry) -> tuple[np.ndarray, np.ndarray]:
    """d(phase)/d(theta), d(phase)/d(phi) per element; da/dx = 1j * dphase/dx * a."""
    ix, iz = arr.index_grid
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    k = 2 * np.pi * arr.spacing_over_wavelength
    d_theta = k * (ix * np.cos(phi) * np.cos(theta) - iz * np.sin(theta))
    d_phi = k * (-ix * np.sin(phi) * np.sin(theta))
    return d_theta, d_phi


_SERIES_CUTOFF = 1e-3


def _pattern_core(u):
    """J1(u)/(2u) + 36 J3(u)/u^3 with a Taylor branch near the origin."""
    u = np.abs(np.asarray(u, dtype=float))
    small = u < _SERIES_CUTOFF
    out = np.empty_like(u)
    us = u[small]
    u2 = us ** 2
    out[small] = (0.25 - u2 / 32 + u2 ** 2 / 768 - u2 ** 3 / 36864
                  + 36 * (1 / 48 - u2 / 768 + u2 ** 2 / 30720 - u2 ** 3 / 2211840))
    ub = u[~small]
    out[~small] = jv(1, ub) / (2 * ub) + 36 * jv(3, ub) / ub ** 3
    return out


def boresight_angle(sat_pos, ue_pos) -> float:
    """Angle between the nadir direction of the satellite and the UE."""
    q = np.asarray(sat_pos, dtype=float)
    v = np.asarray(ue_pos, dtype=float) - q
    nadir = -q / np.linalg.norm(q)
    c = float(np.dot(nadir, v) / np.linalg.norm(v))
    return math.acos(max(-1.0, min(1.0, c)))


def antenna_gain_from_angle(eps, params: ChannelParams):
    """b_max * |J1(u)/(2u) + 36 J3(u)/u^3|^exponent.

    The bracket changes sign in the sidelobes; the magnitude keeps odd
    exponents from producing negative power gains.
    """
    u = 2.071 * np.sin(eps) / math.sin(math.radians(params.half_power_angle_deg))
    return params.antenna_max_gain_linear * np.abs(_pattern_core(u)) ** params.pattern_exponent


def antenna_gain(sat_pos, ue_pos, params: ChannelParams, n: int) -> np.ndarray:
    """Per-element gain ``b_{k,m}``; every element uses the satellite boresight angle."""
    eps = boresight_angle(sat_pos, ue_pos)
    if eps >= math.pi / 2:
        warnings.warn(f"UE outside satellite footprint (boresight angle {eps:.3f} rad)")
    return np.full(n, float(antenna_gain_from_angle(eps, params)))


def free_space_factor(distance_km: float, params: ChannelParams) -> float:
    """(c / (4 pi f d))^2 * (G/T) / (kappa B), the per-element power gain."""
    d = distance_km * 1e3
    fs = (params.speed_of_light / (4 * np.pi * params.carrier_hz * d)) ** 2
    return fs * params.g_over_t_linear / (params.boltzmann * params.bandwidth_hz)


def rain_amplitude(params: ChannelParams, rng: np.random.Generator) -> float:
    """One draw of xi^(1/2)."""
    if not params.rain_enabled:
        return 1.0
    x = rng.normal(params.rain_mu_db, math.sqrt(params.rain_sigma2_db))
    if params.rain_model == "db":
        return 10.0 ** (x / 20.0)
    return math.exp(x)


def channel_gain(sat_pos, ue_pos, params: ChannelParams, n: int, rng: np.random.Generator,
                 record: list | None = None) -> tuple[np.ndarray, dict]:
    """Complex per-element gain ``g_{k,m}`` and its components."""
    d = float(np.linalg.norm(np.asarray(ue_pos) - np.asarray(sat_pos)))
    lo, hi = params.distance_band_km
    if not lo <= d <= hi and record is not None:
        record.append(f"distance {d:.1f} km outside validity band [{lo}, {hi}] km")
    b = antenna_gain(sat_pos, ue_pos, params, n)
    xi_half = rain_amplitude(params, rng)
    psi = rng.uniform(0.0, 2 * np.pi, size=n) if params.rain_enabled else np.zeros(n)
    chi = xi_half * np.exp(-1j * psi)
    g = math.sqrt(free_space_factor(d, params)) * chi * np.sqrt(b)
    return g, {"rain": chi, "antenna_gain": b, "distance_km": d}


def sample_channel(sat_pos, ue_pos, arr: ArrayGeometry, params: ChannelParams,
                   rng: np.random.Generator) -> ChannelRealization:
    """Rician channel h = g * (sqrt(K/(K+1)) h_LOS + sqrt(1/(K+1)) h_NLOS)."""
    record: list = []
    g, parts = channel_gain(sat_pos, ue_pos, params, arr.n, rng, record)
    theta, phi = target_angles(sat_pos, ue_pos)
    los = math.sqrt(arr.n) * steering_vector(theta, phi, arr)
    nlos = (rng.standard_normal(arr.n) + 1j * rng.standard_normal(arr.n)) / math.sqrt(2)
    kf = params.rician_factor_linear
    if math.isinf(kf):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = math.sqrt(kf / (kf + 1)), math.sqrt(1 / (kf + 1))
    h = g * (w_los * los + w_nlos * nlos)
    return ChannelRealization(h, g, los, nlos, parts["rain"], parts["antenna_gain"],
                              parts["distance_km"], record)


def stacked_receive(positions: np.ndarray, p, arr: ArrayGeometry) -> np.ndarray:
    """[a(theta_1, phi_1); ...; a(theta_K, phi_K)] as an NK vector."""
    th, ph = target_angles_batch(positions, np.asarray(p, dtype=float))
    return steering_vector(th, ph, arr).reshape(-1)


def sensing_matrices(positions: np.ndarray, p, arr: ArrayGeometry,
                     gains: SensingGains) -> tuple[np.ndarray, np.ndarray]:
    """A = a_stack a_stack^H (rank one) and B = beta^T (x) 1_{NxN}."""
    for q in np.atleast_2d(positions):
        target_angles(q, p)  # raises on coincident geometry
    a = stacked_receive(positions, p, arr)
    A = np.outer(a, a.conj())
    B = np.kron(np.asarray(gains.beta).T, np.ones((arr.n, arr.n)))
    return A, B
