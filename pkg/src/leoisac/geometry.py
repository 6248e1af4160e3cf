"""Walker-Delta constellation snapshots, serving groups and target angles.

All positions are ECEF Cartesian coordinates in kilometres at a single frozen
epoch. Angles follow the elevation/azimuth convention used by the steering
vectors: ``theta`` is measured from the +z axis, ``phi`` in the x-y plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError, GroupError, SingularJacobianError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class ConstellationConfig:
    orbital_altitude_km: float = 550.0
    num_planes: int = 72
    sats_per_plane: int = 22
    inclination_deg: float = 53.0
    phase_factor: int = 1
    earth_radius_km: float = EARTH_RADIUS_KM

    def validate(self) -> None:
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ConfigurationError("num_planes and sats_per_plane must be >= 1")
        if not 0 <= self.phase_factor < self.num_planes:
            raise ConfigurationError(
                f"phase_factor must lie in [0, num_planes), got {self.phase_factor}")
        if self.orbital_altitude_km <= 0 or self.earth_radius_km <= 0:
            raise ConfigurationError("altitude and earth radius must be positive")

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.orbital_altitude_km


@dataclass(frozen=True)
class SatelliteState:
    index: tuple[int, int]  # (plane, slot)
    position_ecef_km: np.ndarray
    max_power_dbm: float = 30.0

    @property
    def plane(self) -> int:
        return self.index[0]

    @property
    def slot(self) -> int:
        return self.index[1]


@dataclass(frozen=True)
class ServingGroup:
    """Central satellite followed by its auxiliaries (central is member 0)."""
    central_sat: SatelliteState
    auxiliary_sats: tuple[SatelliteState, ...]
    collaboration_type: str

    def __post_init__(self):
        idx = [s.index for s in self.members]
        if len(set(idx)) != len(idx):
            raise GroupError("serving group members must be distinct")

    @property
    def members(self) -> tuple[SatelliteState, ...]:
        return (self.central_sat,) + tuple(self.auxiliary_sats)

    @property
    def size(self) -> int:
        return 1 + len(self.auxiliary_sats)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position_ecef_km for s in self.members])


@dataclass(frozen=True)
class TargetState:
    position_ecef_km: np.ndarray
    reflection_coeff: float = 1.0

    def __post_init__(self):
        if not self.reflection_coeff > 0:
            raise ConfigurationError("reflection_coeff must be > 0")


@dataclass(frozen=True)
class AngleSet:
    elevations: np.ndarray
    azimuths: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        """Omega = [theta_1..theta_K, phi_1..phi_K]."""
        return np.concatenate([self.elevations, self.azimuths])


def build_walker_delta(cfg: ConstellationConfig, max_power_dbm: float = 30.0) -> list[SatelliteState]:
    """Satellite positions of a Walker Delta pattern at epoch angle zero.

    Plane ``p`` has RAAN ``2*pi*p/P`` and slot ``n`` sits at argument of
    latitude ``2*pi*n/N + 2*pi*F*p/(P*N)``.
    """
    cfg.validate()
    P, N, F = cfg.num_planes, cfg.sats_per_plane, cfg.phase_factor
    r = cfg.orbit_radius_km
    inc = math.radians(cfg.inclination_deg)
    sats = []
    for p in range(P):
        raan = 2 * math.pi * p / P
        for n in range(N):
            u = 2 * math.pi * n / N + 2 * math.pi * F * p / (P * N)
            pos = r * np.array([
                math.cos(raan) * math.cos(u) - math.sin(raan) * math.sin(u) * math.cos(inc),
                math.sin(raan) * math.cos(u) + math.cos(raan) * math.sin(u) * math.cos(inc),
                math.sin(u) * math.sin(inc),
            ])
            sats.append(SatelliteState((p, n), pos, max_power_dbm))
    return sats


def positions_array(sats: Sequence[SatelliteState]) -> np.ndarray:
    return np.array([s.position_ecef_km for s in sats])


def _sorted_by_distance(cands: list[SatelliteState], ref: np.ndarray) -> list[SatelliteState]:
    return sorted(cands, key=lambda s: (round(float(np.linalg.norm(s.position_ecef_km - ref)), 9), s.index))


def select_serving_group(sats: Sequence[SatelliteState], central: tuple[int, int],
                         collab_type: str, k_total: int) -> ServingGroup:
    """Pick ``k_total`` satellites around ``central`` for a collaboration type.

    Type I uses the nearest in-plane neighbours. Type II adds the nearest
    satellite on each adjacent plane. Type III then fills the remaining seats
    with the next-nearest adjacent-plane satellites. Distances are Euclidean
    in ECEF; ties break on (plane, slot).
    """
    collab_type = collab_type.upper()
    if collab_type not in ("I", "II", "III"):
        raise GroupError(f"unknown collaboration type {collab_type!r}")
    if k_total < 1:
        raise GroupError("k_total must be >= 1")
    by_index = {s.index: s for s in sats}
    if central not in by_index:
        raise GroupError(f"central satellite {central} not in constellation")
    c = by_index[central]
    ref = c.position_ecef_km
    planes = sorted({s.plane for s in sats})
    n_planes = len(planes)

    in_plane = _sorted_by_distance([s for s in sats if s.plane == c.plane and s.index != central], ref)
    adj_planes = []
    if collab_type in ("II", "III") and n_planes > 1:
        pos = planes.index(c.plane)
        adj_planes = sorted({planes[(pos - 1) % n_planes], planes[(pos + 1) % n_planes]} - {c.plane})

    order = in_plane[:2] if collab_type != "I" else in_plane
    if collab_type in ("II", "III"):
        nearest_adj = []
        rest_adj = []
        for p in adj_planes:
            cands = _sorted_by_distance([s for s in sats if s.plane == p], ref)
            nearest_adj.append(cands[0])
            rest_adj.extend(cands[1:])
        order = order + _sorted_by_distance(nearest_adj, ref)
        if collab_type == "III":
            order = order + _sorted_by_distance(rest_adj, ref)

    if k_total - 1 > len(order):
        raise GroupError(
            f"type {collab_type} supports at most {len(order) + 1} satellites, requested {k_total}")
    return ServingGroup(c, tuple(order[:k_total - 1]), collab_type)


def target_angles(q, p) -> tuple[float, float]:
    """Elevation and azimuth of point ``p`` seen from satellite ``q``.

    ``theta = arctan(rho/dz) + pi*[dz < 0]`` which equals ``arctan2(rho, dz)``;
    azimuth uses the quadrant-corrected arctangent, in (-pi, pi].
    """
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    if not np.any(d):
        raise GeometryError("target coincides with satellite")
    rho = math.hypot(d[0], d[1])
    theta = math.atan2(rho, d[2])
    phi = math.atan2(d[1], d[0])
    return theta, phi


def target_angles_batch(qs: np.ndarray, ps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`target_angles`: ``qs`` (K,3), ``ps`` (...,3) -> (...,K)."""
    d = np.asarray(ps, dtype=float)[..., None, :] - np.asarray(qs, dtype=float)
    rho = np.hypot(d[..., 0], d[..., 1])
    return np.arctan2(rho, d[..., 2]), np.arctan2(d[..., 1], d[..., 0])


def group_angles(positions: np.ndarray, p) -> AngleSet:
    positions = np.atleast_2d(positions)
    if np.any(np.all(positions == np.asarray(p, dtype=float), axis=1)):
        raise GeometryError("target coincides with a satellite")
    th, ph = target_angles_batch(positions, np.asarray(p, dtype=float))
    return AngleSet(th, ph)


def angle_jacobian(positions: np.ndarray, p) -> np.ndarray:
    """Jacobian d[theta; phi]/dp, shape (2K, 3), rows theta_1..theta_K, phi_1..phi_K."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    d = np.asarray(p, dtype=float) - positions
    rho2 = d[:, 0] ** 2 + d[:, 1] ** 2
    if np.any(rho2 == 0):
        raise SingularJacobianError("azimuth undefined: target directly above/below a satellite")
    rho = np.sqrt(rho2)
    D2 = rho2 + d[:, 2] ** 2
    K = len(positions)
    J = np.zeros((2 * K, 3))
    J[:K, 0] = d[:, 0] * d[:, 2] / (D2 * rho)
    J[:K, 1] = d[:, 1] * d[:, 2] / (D2 * rho)
    J[:K, 2] = -rho / D2
    J[K:, 0] = -d[:, 1] / rho2
    J[K:, 1] = d[:, 0] / rho2
    return J


def _cap_frame(center: np.ndarray):
    z = center / np.linalg.norm(center)
    helper = np.array([0.0, 0.0, 1.0]) if abs(z[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return x, y, z


def sample_cap(center_dir, radius_km: float, count: int, rng: np.random.Generator,
               earth_radius_km: float = EARTH_RADIUS_KM, altitude_km: float = 0.0) -> np.ndarray:
    """Points uniform on a spherical cap with arc radius ``radius_km``."""
    if radius_km < 0:
        raise ConfigurationError("cap radius must be non-negative")
    psi = radius_km / earth_radius_km
    if psi > math.pi / 2:
        raise ConfigurationError("footprint larger than a hemisphere")
    x, y, z = _cap_frame(np.asarray(center_dir, dtype=float))
    cos_t = 1.0 - rng.uniform(size=count) * (1.0 - math.cos(psi))
    sin_t = np.sqrt(np.clip(1.0 - cos_t ** 2, 0.0, None))
    az = rng.uniform(0.0, 2 * math.pi, size=count)
    dirs = (np.outer(sin_t * np.cos(az), x) + np.outer(sin_t * np.sin(az), y) + np.outer(cos_t, z))
    return (earth_radius_km + altitude_km) * dirs


def place_ues(group: ServingGroup, m: int, footprint_radius_km: float, rng: np.random.Generator,
              earth_radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    """``m`` UE positions uniform on the cap centred under the central satellite."""
    if m < 1:
        raise ConfigurationError("need at least one UE")
    return sample_cap(group.central_sat.position_ecef_km, footprint_radius_km, m, rng, earth_radius_km)


def place_target(group: ServingGroup, radius_km: float, rng: np.random.Generator,
                 reflection_coeff: float = 1.0, altitude_km: float = 0.0,
                 earth_radius_km: float = EARTH_RADIUS_KM) -> TargetState:
    pos = sample_cap(group.central_sat.position_ecef_km, radius_km, 1, rng, earth_radius_km, altitude_km)[0]
    return TargetState(pos, reflection_coeff)


def sub_satellite_point(sat: SatelliteState, earth_radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    q = sat.position_ecef_km
    return earth_radius_km * q / np.linalg.norm(q)


def constellation_csv(sats: Sequence[SatelliteState]) -> str:
    lines = ["plane,slot,x_km,y_km,z_km"]
    for s in sats:
        x, y, z = (float(v) for v in s.position_ecef_km)
        lines.append(f"{s.plane},{s.slot},{x!r},{y!r},{z!r}")
    return "\r\n".join(lines) + "\r\n"
