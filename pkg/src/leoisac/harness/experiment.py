"""Seeded Monte Carlo runs and one-axis sweeps.

Seeding layout (all through ``numpy.random.SeedSequence``):

* scene geometry and the frozen channel draw use ``master_seed`` directly, so
  every sweep point sees the same UE drops and target offset;
* trial ``t`` draws symbols, noise and the PSO swarm from spawn key ``(2, t)``;
* with ``redraw_channels`` the fading of trial ``t`` uses channel stream ``t + 1``.

Trial results depend only on the trial index, so the execution order (and the
worker count) cannot change the aggregates.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..beamform_opt import solve_comm_centric, solve_sensing_centric, zfbf_baseline
from ..crb import evaluate_crb
from ..errors import ConfigurationError, ExperimentAbortedError, InfeasibleError, LeoIsacError
from ..localization import default_box, pso_locate
from ..scene import build_scene
from ..signal_model import BeamformingSolution, SymbolBlock, all_rates, synthesize_received
from .config import ExperimentConfig

METRICS = ("rcrb_m", "rmse_m", "min_rate", "mean_rate", "iterations")
CSV_HEADER = ("sweep_value", "metric", "mean", "std", "n")
VERSION = "0.1.0"


@dataclass(frozen=True)
class ResultRow:
    sweep_value: str
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        """RFC 4180 text (CRLF line ends); floats use the shortest round-trip repr."""
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.sweep_value, r.metric, repr(float(r.mean)), repr(float(r.std)), str(int(r.n))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text, newline=""))
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return cls([ResultRow(v, m, float(a), float(s), int(n)) for v, m, a, s, n in reader])

    def get(self, metric: str, sweep_value: str) -> ResultRow:
        for r in self.rows:
            if r.metric == metric and r.sweep_value == sweep_value:
                return r
        raise KeyError((metric, sweep_value))

    def series(self, metric: str) -> list[tuple[str, float]]:
        return [(r.sweep_value, r.mean) for r in self.rows if r.metric == metric]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultTable) or len(self.rows) != len(other.rows):
            return False
        for a, b in zip(self.rows, other.rows):
            same_num = all((x == y) or (math.isnan(x) and math.isnan(y))
                           for x, y in ((a.mean, b.mean), (a.std, b.std)))
            if (a.sweep_value, a.metric, a.n) != (b.sweep_value, b.metric, b.n) or not same_num:
                return False
        return True


@dataclass
class RunManifest:
    config_hash: str
    master_seed: int
    trial_seeds: list
    code_version: str
    timing: dict
    warnings: list
    failures: list
    infeasible: int
    config: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


@dataclass
class Design:
    solution: BeamformingSolution
    rcrb_m: float
    rates: np.ndarray
    iterations: int
    notes: list = field(default_factory=list)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(2, trial)))


def trial_seed(master_seed: int, trial: int) -> int:
    """A 32-bit fingerprint of the trial stream, recorded in the manifest."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(2, trial)).generate_state(1)[0])


def format_value(value) -> str:
    if value is None:
        return "default"
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return "x".join(str(v) for v in value)
    return format(float(value), "g")


def design_for(scene, cfg: ExperimentConfig, solution: BeamformingSolution | None = None) -> Design:
    """Transmit design for one scene: fixed, zero-forcing, or the penalty-SDR optimizer."""
    if solution is not None:
        return Design(solution, evaluate_crb(scene, solution, warn=False).rcrb_m,
                      all_rates(solution, scene) if scene.M else np.zeros(0), 0)
    if cfg.design == "zfbf":
        sol = zfbf_baseline(scene, cfg.optimizer.eta_rate)
        return Design(sol, evaluate_crb(scene, sol, warn=False).rcrb_m,
                      all_rates(sol, scene) if scene.M else np.zeros(0), 0)
    ocfg = cfg.optimizer_config()
    if ocfg.objective_mode == "comm_centric":
        rep = solve_comm_centric(scene, ocfg)
    else:
        rep = solve_sensing_centric(scene, ocfg)
    return Design(rep.solution, rep.rcrb_m, rep.rates, rep.iterations, list(rep.warnings))


def locate_error_km(scene, design: Design, cfg: ExperimentConfig, rng: np.random.Generator) -> float:
    """One noisy observation, one PSO run; returns the position error in km."""
    sol = design.solution
    s = SymbolBlock.draw(sol.M, rng).s
    obs = synthesize_received(scene, sol, s, scene.alpha, rng, noiseless=False)
    res = pso_locate(obs, scene, sol, s, cfg.pso_config(), rng,
                     box=default_box(scene, cfg.pso.box_side_km))
    return float(np.linalg.norm(res.p_hat - scene.target.position_ecef_km))


@dataclass
class _TrialOutcome:
    trial: int
    error_km: float | None = None
    rcrb_m: float | None = None
    min_rate: float | None = None
    mean_rate: float | None = None
    iterations: int | None = None
    failure: str | None = None
    infeasible: bool = False
    notes: list = field(default_factory=list)


def _design_or_failure(cfg, scene_cfg, stream, solution):
    try:
        scene = build_scene(scene_cfg, cfg.master_seed, channel_stream=stream)
        return scene, design_for(scene, cfg, solution), None
    except InfeasibleError as exc:
        return None, None, ("infeasible", str(exc))
    except LeoIsacError as exc:
        return None, None, (type(exc).__name__, str(exc))


def _run_trials(cfg: ExperimentConfig, point_cfg: ExperimentConfig, trials, frozen, solution):
    """Trials for one sweep point; ``frozen`` is (scene, design, failure) or None to redraw."""
    scene_cfg = point_cfg.scene_config()
    out = []
    for t in trials:
        if frozen is None:
            scene, design, fail = _design_or_failure(point_cfg, scene_cfg, t + 1, solution)
        else:
            scene, design, fail = frozen
        o = _TrialOutcome(t)
        if fail is not None:
            o.failure, o.infeasible = f"{fail[0]}: {fail[1]}", fail[0] == "infeasible"
            out.append(o)
            continue
        try:
            o.error_km = locate_error_km(scene, design, point_cfg, trial_rng(cfg.master_seed, t))
        except LeoIsacError as exc:
            o.failure = f"{type(exc).__name__}: {exc}"
            out.append(o)
            continue
        o.rcrb_m = design.rcrb_m
        if len(design.rates):
            o.min_rate, o.mean_rate = float(np.min(design.rates)), float(np.mean(design.rates))
        o.iterations = design.iterations
        o.notes = list(design.notes) if frozen is None else []
        out.append(o)
    return out


def _stats(values) -> tuple[float, float, int]:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan"), 0
    return float(np.mean(v)), float(np.std(v)), int(v.size)


def _aggregate(label: str, outcomes: list) -> list[ResultRow]:
    ok = [o for o in outcomes if o.failure is None]
    rows = []
    mean, std, n = _stats([o.rcrb_m for o in ok])
    rows.append(ResultRow(label, "rcrb_m", mean, std, n))
    err = np.asarray([o.error_km for o in ok], dtype=float) * 1e3
    if err.size:
        rows.append(ResultRow(label, "rmse_m", float(np.sqrt(np.mean(err ** 2))), float(np.std(err)), int(err.size)))
    else:
        rows.append(ResultRow(label, "rmse_m", float("nan"), float("nan"), 0))
    for metric in ("min_rate", "mean_rate", "iterations"):
        mean, std, n = _stats([getattr(o, metric) for o in ok])
        rows.append(ResultRow(label, metric, mean, std, n))
    return rows


def _chunks(n: int, k: int) -> list[list[int]]:
    k = max(1, min(k, n))
    return [list(range(i, n, k)) for i in range(k)]


def _evaluate_point(cfg: ExperimentConfig, axis, value, solution=None, workers: int = 1):
    point_cfg = cfg.at(axis, value)
    t0 = time.perf_counter()
    frozen = None
    warnings_out = []
    if not cfg.redraw_channels:
        frozen = _design_or_failure(point_cfg, point_cfg.scene_config(), 0, solution)
        if frozen[0] is not None:
            warnings_out.extend(frozen[0].warnings)
            warnings_out.extend(frozen[1].notes)
    trials = list(range(cfg.num_trials))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_trials, *zip(*[(cfg, point_cfg, c, frozen, solution)
                                                       for c in _chunks(len(trials), workers)])))
        outcomes = sorted((o for p in parts for o in p), key=lambda o: o.trial)
    else:
        outcomes = _run_trials(cfg, point_cfg, trials, frozen, solution)
    for o in outcomes:
        warnings_out.extend(o.notes)
    return outcomes, warnings_out, time.perf_counter() - t0


def _point_job(args):
    cfg, axis, value, solution = args
    return _evaluate_point(cfg, axis, value, solution)


def _execute(cfg: ExperimentConfig, axis, values, solution) -> tuple[ResultTable, RunManifest]:
    jobs = [(cfg, axis, v, solution) for v in values]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_point_job, jobs))
    else:
        results = [_evaluate_point(cfg, axis, v, solution, cfg.workers) for v in values]

    table = ResultTable()
    timing, warnings_out, failures = {}, [], []
    infeasible = 0
    for v, (outcomes, warns, wall) in zip(values, results):
        label = format_value(v)
        timing[label] = wall
        warnings_out.extend(f"[{label}] {w}" for w in dict.fromkeys(warns))
        bad = [o for o in outcomes if o.failure is not None]
        infeasible += sum(o.infeasible for o in bad)
        failures.extend({"sweep_value": label, "trial": o.trial, "reason": o.failure} for o in bad)
        if len(bad) * 2 > len(outcomes):
            raise ExperimentAbortedError(
                f"{len(bad)} of {len(outcomes)} trials failed at sweep value {label}", failures)
        table.rows.extend(_aggregate(label, outcomes))
    manifest = RunManifest(
        config_hash=cfg.config_hash(), master_seed=cfg.master_seed,
        trial_seeds=[trial_seed(cfg.master_seed, t) for t in range(cfg.num_trials)],
        code_version=VERSION, timing={"wall_time_s": timing}, warnings=warnings_out, failures=failures,
        infeasible=infeasible, config=cfg.to_dict())
    return table, manifest


def sweep(cfg: ExperimentConfig, axis: str | None = None, values=None,
          solution: BeamformingSolution | None = None) -> tuple[ResultTable, RunManifest]:
    """Evaluate every value of one axis; defaults to the config's sweep block.

    Each point gets one design on the frozen scene (or one per trial with
    ``redraw_channels``) and ``num_trials`` localisation trials.
    """
    if axis is None:
        axis, values = cfg.sweep.axis, cfg.sweep.values
    if axis is None:
        return run_montecarlo(cfg, solution)
    if values is None or len(values) == 0:
        raise ConfigurationError(f"no values given for sweep axis {axis}")
    for v in values:
        cfg.at(axis, v)  # validate every value before any work starts
    return _execute(cfg, axis, list(values), solution)


def run_montecarlo(cfg: ExperimentConfig, solution: BeamformingSolution | None = None
                   ) -> tuple[ResultTable, RunManifest]:
    """All trials at the base configuration, ignoring any sweep block."""
    return _execute(cfg, None, [None], solution)
