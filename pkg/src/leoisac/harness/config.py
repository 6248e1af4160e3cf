"""Experiment configuration: nested blocks with Table II defaults and strict keys.

A YAML file mirrors the block layout below. Missing keys fall back to the
defaults; unknown keys raise :class:`ConfigurationError` so that a typo never
turns into a silent default.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from ..beamform_opt import OptimizerConfig
from ..channel import ArrayGeometry, ChannelParams
from ..errors import ConfigurationError
from ..geometry import ConstellationConfig
from ..localization import PsoConfig
from ..scene import SceneConfig

AXES = ("pmax_dbm", "eta", "collab_type", "array_size", "sats_per_plane", "num_planes")
DESIGNS = ("alg2", "zfbf")


@dataclass(frozen=True)
class ConstellationBlock:
    orbital_altitude_km: float = 550.0
    num_planes: int = 72
    sats_per_plane: int = 22
    inclination_deg: float = 53.0
    phase_factor: int = 1


@dataclass(frozen=True)
class ChannelBlock:
    rician_factor_db: float = 10.0
    carrier_frequency_ghz: float = 35.0
    bandwidth_mhz: float = 20.0
    g_over_t_db: float = 34.0
    noise_power_dbm: float = -110.0
    rain_mu_db: float = -2.6
    rain_sigma2_db: float = 1.63
    rain_enabled: bool = True
    max_antenna_gain_dbi: float = 16.0
    half_power_angle_deg: float = 0.4
    pattern_exponent: int = 2


@dataclass(frozen=True)
class ArrayBlock:
    nx: int = 4
    nz: int = 4


@dataclass(frozen=True)
class GroupBlock:
    num_sats: int = 5
    collaboration_type: str = "II"
    central_plane: int = 0
    central_slot: int = 0
    # group size used for each type when the collaboration type is swept
    size_by_type: dict = field(default_factory=lambda: {"I": 3, "II": 5, "III": 7})


@dataclass(frozen=True)
class UeBlock:
    num_ues: int = 10
    footprint_radius_km: float = 50.0


@dataclass(frozen=True)
class TargetBlock:
    radius_km: float = 5.0
    altitude_km: float = 0.0
    reflection_coeff: float = 1e-3
    beta_model: str = "unit"


@dataclass(frozen=True)
class PsoBlock:
    num_particles: int = 50
    max_iters: int = 40
    c1: float = 1.5
    c2: float = 1.5
    w_max: float = 0.8
    w_min: float = 0.4
    box_side_km: float = 20.0


@dataclass(frozen=True)
class OptimizerBlock:
    eta_rate: float = 2.0
    pmax_dbm: float = 30.0
    rho0: float = 10.0
    iota: float = 1.5
    delta: float = 1e-4
    max_outer_iters: int = 20
    solver_tol: float | None = None
    objective_mode: str = "sensing_centric"
    eta_crb: float | None = None
    objective_scale: float = 1000.0
    rate_mode: str = "dca"


@dataclass(frozen=True)
class SweepBlock:
    axis: str | None = None
    values: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    constellation: ConstellationBlock = ConstellationBlock()
    channel: ChannelBlock = ChannelBlock()
    array: ArrayBlock = ArrayBlock()
    group: GroupBlock = GroupBlock()
    ue: UeBlock = UeBlock()
    target: TargetBlock = TargetBlock()
    pso: PsoBlock = PsoBlock()
    optimizer: OptimizerBlock = OptimizerBlock()
    sweep: SweepBlock = SweepBlock()
    design: str = "alg2"
    num_trials: int = 100
    master_seed: int = 0
    redraw_channels: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.num_trials < 1:
            raise ConfigurationError("num_trials must be >= 1")
        if self.design not in DESIGNS:
            raise ConfigurationError(f"design must be one of {DESIGNS}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.sweep.axis is not None and self.sweep.axis not in AXES:
            raise ConfigurationError(f"sweep axis must be one of {AXES}, got {self.sweep.axis!r}")
        if self.sweep.axis is not None and not self.sweep.values:
            raise ConfigurationError("sweep axis given without values")
        # build the module-level configs once so invalid values fail here
        self.scene_config()
        self.optimizer_config()
        self.pso_config()

    # -- conversions into module configs ---------------------------------

    def scene_config(self) -> SceneConfig:
        c, ch, a, g = self.constellation, self.channel, self.array, self.group
        params = ChannelParams.from_table(
            rician_factor_db=ch.rician_factor_db, carrier_hz=ch.carrier_frequency_ghz * 1e9,
            bandwidth_hz=ch.bandwidth_mhz * 1e6, g_over_t_db_per_k=ch.g_over_t_db,
            antenna_max_gain_dbi=ch.max_antenna_gain_dbi, noise_power_dbm=ch.noise_power_dbm,
            rain_mu_db=ch.rain_mu_db, rain_sigma2_db=ch.rain_sigma2_db, rain_enabled=ch.rain_enabled,
            half_power_angle_deg=ch.half_power_angle_deg, pattern_exponent=ch.pattern_exponent)
        return SceneConfig(
            constellation=ConstellationConfig(c.orbital_altitude_km, c.num_planes, c.sats_per_plane,
                                              c.inclination_deg, c.phase_factor),
            central=(g.central_plane, g.central_slot), collaboration_type=g.collaboration_type,
            num_sats=g.num_sats, num_ues=self.ue.num_ues, footprint_radius_km=self.ue.footprint_radius_km,
            target_radius_km=self.target.radius_km, target_altitude_km=self.target.altitude_km,
            array=ArrayGeometry(a.nx, a.nz, wavelength_m=params.wavelength_m), channel=params,
            reflection_coeff=self.target.reflection_coeff, p_max_dbm=self.optimizer.pmax_dbm,
            beta_model=self.target.beta_model)

    def optimizer_config(self) -> OptimizerConfig:
        o = self.optimizer
        return OptimizerConfig(
            eta_rate=o.eta_rate, p_max_dbm=o.pmax_dbm, rho0=o.rho0, iota=o.iota, delta=o.delta,
            max_outer_iters=o.max_outer_iters, solver_tol=o.solver_tol, objective_mode=o.objective_mode,
            eta_crb=math.inf if o.eta_crb is None else o.eta_crb, objective_scale=o.objective_scale,
            rate_mode=o.rate_mode)

    def pso_config(self) -> PsoConfig:
        p = self.pso
        if not p.box_side_km > 0:
            raise ConfigurationError("box_side_km must be positive")
        return PsoConfig(num_particles=p.num_particles, max_iters=p.max_iters, c1=p.c1, c2=p.c2,
                         w_max=p.w_max, w_min=p.w_min)

    # -- sweep support ---------------------------------------------------

    def at(self, axis: str | None, value) -> "ExperimentConfig":
        """This configuration with one sweep axis pinned to ``value``."""
        if axis is None:
            return self
        r = dataclasses.replace
        if axis == "pmax_dbm":
            return r(self, optimizer=r(self.optimizer, pmax_dbm=float(value)))
        if axis == "eta":
            return r(self, optimizer=r(self.optimizer, eta_rate=float(value)))
        if axis == "collab_type":
            t = str(value).upper()
            if t not in self.group.size_by_type:
                raise ConfigurationError(f"no group size configured for type {t}")
            return r(self, group=r(self.group, collaboration_type=t, num_sats=int(self.group.size_by_type[t])))
        if axis == "array_size":
            nx, nz = parse_array_size(value)
            return r(self, array=ArrayBlock(nx, nz))
        if axis == "sats_per_plane":
            return r(self, constellation=r(self.constellation, sats_per_plane=int(value)))
        if axis == "num_planes":
            return r(self, constellation=r(self.constellation, num_planes=int(value)))
        raise ConfigurationError(f"unknown sweep axis {axis!r}")

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["sweep"]["values"] = list(self.sweep.values)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_array_size(value) -> tuple[int, int]:
    """'4x4' or [4, 4] -> (4, 4)."""
    if isinstance(value, str):
        parts = value.lower().replace("×", "x").split("x")
    else:
        parts = list(value)
    try:
        nx, nz = (int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigurationError(f"array size must look like '4x4', got {value!r}") from None
    return nx, nz


def _coerce(name: str, value, default):
    """Light type check against the default's type (ints may stand in for floats)."""
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{name} must be true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{name} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{name} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{name} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{name} must be a list")
        return tuple(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigurationError(f"{name} must be a mapping")
        return dict(value)
    return value


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    proto = cls()
    for key, value in data.items():
        default = getattr(proto, key)
        name = f"{path}.{key}" if path else key
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value or {}, name)
        else:
            kwargs[key] = _coerce(name, value, default)
    return cls(**kwargs)


def config_from_dict(data: dict | None) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "")


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a YAML experiment file; ``None`` gives the all-default configuration."""
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML in {path}: {exc}") from None
    return config_from_dict(data)


def preset_path(name: str) -> Path:
    p = Path(__file__).resolve().parent.parent / "presets" / f"{name}.yaml"
    if not p.exists():
        raise ConfigurationError(f"no preset named {name!r}")
    return p
