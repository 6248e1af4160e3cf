"""Frozen scene snapshots: group geometry, target, UEs and channel draws."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import (ArrayGeometry, ChannelParams, SensingGains, dbm_to_watt, sample_channel,
                      sensing_matrices)
from .errors import ConfigurationError
from .geometry import (ConstellationConfig, TargetState, angle_jacobian, build_walker_delta,
                       group_angles, place_target, place_ues, select_serving_group,
                       sub_satellite_point)


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to draw one scene; units are km, dBm and linear gains."""
    constellation: ConstellationConfig = ConstellationConfig()
    central: tuple[int, int] = (0, 0)
    collaboration_type: str = "II"
    num_sats: int = 5
    num_ues: int = 10
    footprint_radius_km: float = 50.0
    target_radius_km: float = 5.0
    target_altitude_km: float = 0.0
    array: ArrayGeometry = ArrayGeometry()
    channel: ChannelParams = ChannelParams()
    reflection_coeff: float = 1e-3
    p_max_dbm: float = 30.0
    beta_model: str = "unit"

    def __post_init__(self):
        if self.num_ues < 0:
            raise ConfigurationError("num_ues must be >= 0")
        if self.beta_model not in ("unit", "two_hop"):
            raise ConfigurationError("beta_model must be 'unit' or 'two_hop'")


@dataclass(frozen=True)
class SceneSnapshot:
    """One frozen geometry plus channel state.

    ``h_tilde[i]`` is the NK-stack of the channels from every group member to
    UE ``i``. ``target.reflection_coeff`` is the true alpha.
    """
    positions_km: np.ndarray
    target: TargetState
    ue_positions_km: np.ndarray
    h_tilde: np.ndarray
    arr: ArrayGeometry
    gains: SensingGains
    noise_power_w: float
    ue_noise_w: np.ndarray
    p_max_w: np.ndarray
    box_center_km: np.ndarray = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def K(self) -> int:
        return len(self.positions_km)

    @property
    def N(self) -> int:
        return self.arr.n

    @property
    def M(self) -> int:
        return len(self.h_tilde)

    @property
    def NK(self) -> int:
        return self.N * self.K

    @property
    def alpha(self) -> float:
        return self.target.reflection_coeff

    @cached_property
    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return sensing_matrices(self.positions_km, self.target.position_ecef_km, self.arr, self.gains)

    @cached_property
    def jacobian(self) -> np.ndarray:
        return angle_jacobian(self.positions_km, self.target.position_ecef_km)

    @cached_property
    def angles(self):
        return group_angles(self.positions_km, self.target.position_ecef_km)

    def replace(self, **changes) -> "SceneSnapshot":
        return dataclasses.replace(self, **changes)

    def with_power_dbm(self, p_max_dbm) -> "SceneSnapshot":
        p = np.broadcast_to(dbm_to_watt(p_max_dbm), (self.K,)).astype(float)
        return self.replace(p_max_w=p)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def draw_channels(positions_km, ue_positions_km, arr: ArrayGeometry, params: ChannelParams,
                  seed: int, stream: int = 0) -> tuple[np.ndarray, list]:
    """Stacked channels ``(M, NK)``; each (k, m) pair uses its own sub-seed."""
    K, M = len(positions_km), len(ue_positions_km)
    h = np.zeros((M, K * arr.n), dtype=complex)
    notes = []
    for m in range(M):
        for k in range(K):
            real = sample_channel(positions_km[k], ue_positions_km[m], arr, params, _rng(seed, 1, stream, k, m))
            h[m, k * arr.n:(k + 1) * arr.n] = real.h
            notes.extend(f"sat {k} ue {m}: {w}" for w in real.warnings)
    return h, notes


def build_scene(cfg: SceneConfig, seed: int, sats=None, channel_stream: int = 0) -> SceneSnapshot:
    """Draw the group, UE drops, target and channels for one scene.

    Geometry depends on ``seed`` only; ``channel_stream`` selects an
    independent fading draw over the same geometry.
    """
    sats = build_walker_delta(cfg.constellation) if sats is None else sats
    group = select_serving_group(sats, cfg.central, cfg.collaboration_type, cfg.num_sats)
    geo = _rng(seed, 0)
    target = place_target(group, cfg.target_radius_km, geo, cfg.reflection_coeff, cfg.target_altitude_km,
                          cfg.constellation.earth_radius_km)
    if cfg.num_ues:
        ues = place_ues(group, cfg.num_ues, cfg.footprint_radius_km, geo, cfg.constellation.earth_radius_km)
    else:
        ues = np.zeros((0, 3))
    pos = group.positions
    h, notes = draw_channels(pos, ues, cfg.array, cfg.channel, seed, channel_stream)
    if cfg.beta_model == "unit":
        gains = SensingGains.unit(len(pos))
    else:
        gains = SensingGains.two_hop(pos, target.position_ecef_km, cfg.channel.wavelength_m)
    noise = cfg.channel.noise_power_w
    return SceneSnapshot(
        positions_km=pos, target=target, ue_positions_km=ues, h_tilde=h, arr=cfg.array, gains=gains,
        noise_power_w=noise, ue_noise_w=np.full(len(ues), noise),
        p_max_w=np.full(len(pos), float(dbm_to_watt(cfg.p_max_dbm))),
        box_center_km=sub_satellite_point(group.central_sat, cfg.constellation.earth_radius_km),
        warnings=tuple(notes))
