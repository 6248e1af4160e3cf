"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 infeasible design,
4 numerical failure (solver breakdown, aborted experiment, and the rest).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ..beamform_opt import solve_comm_centric, solve_sensing_centric
from ..crb import evaluate_crb
from ..errors import (ConfigurationError, GeometryError, GroupError, InfeasibleError, LeoIsacError,
                      ParameterError)
from ..geometry import build_walker_delta, constellation_csv
from ..localization import default_box, pso_locate
from ..scene import build_scene
from ..signal_model import (BeamformingSolution, SensingObservation, SymbolBlock, dump_observation,
                            load_observation, synthesize_received)
from .config import ExperimentConfig, load_config, preset_path
from .experiment import design_for, run_montecarlo, sweep, trial_rng
from .io import write_results

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
PAPER_SCALE_TRIALS = 1000


def _resolve_config(arg: str | None) -> Path | None:
    """A YAML path, or the bare name of a shipped preset such as ``fig6``."""
    if arg is None:
        return None
    p = Path(arg)
    if p.exists() or p.suffix:
        return p
    return preset_path(arg)


def _config(args) -> ExperimentConfig:
    cfg = load_config(_resolve_config(args.config))
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.paper_scale:
        changes["num_trials"] = PAPER_SCALE_TRIALS
    opt = {}
    for flag, key in (("pmax_dbm", "pmax_dbm"), ("eta", "eta_rate"), ("eta_crb", "eta_crb")):
        v = getattr(args, flag, None)
        if v is not None:
            opt[key] = v
    if getattr(args, "mode", None) is not None:
        opt["objective_mode"] = {"sensing": "sensing_centric", "comm": "comm_centric"}[args.mode]
    if opt:
        changes["optimizer"] = dataclasses.replace(cfg.optimizer, **opt)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(text.encode("utf-8"))
    print(out / name)


def _scene_and_solution(cfg: ExperimentConfig, solution_path: str | None):
    scene = build_scene(cfg.scene_config(), cfg.master_seed)
    if solution_path is None:
        return scene, design_for(scene, dataclasses.replace(cfg, design="zfbf")).solution
    try:
        data = json.loads(Path(solution_path).read_text(encoding="utf-8"))
        sol = BeamformingSolution.from_json(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"cannot read solution {solution_path}: {exc}") from None
    if sol.NK != scene.NK or sol.M != scene.M:
        raise ConfigurationError(f"solution shape (M={sol.M}, NK={sol.NK}) does not match the scene "
                                 f"(M={scene.M}, NK={scene.NK})")
    return scene, sol


def cmd_constellation(args) -> int:
    cfg = _config(args)
    sats = build_walker_delta(cfg.scene_config().constellation, cfg.optimizer.pmax_dbm)
    _emit(args, "constellation.csv", constellation_csv(sats))
    return EXIT_OK


def cmd_crb(args) -> int:
    cfg = _config(args)
    scene, sol = _scene_and_solution(cfg, args.solution)
    b = evaluate_crb(scene, sol)
    out = {"trace_crb_km2": b.crb_trace, "rcrb_m": b.rcrb_m,
           "per_axis_crb": [float(v) for v in np.diag(b.crb_matrix)]}
    _emit(args, "crb.json", json.dumps(out, indent=2))
    return EXIT_OK


def cmd_locate(args) -> int:
    cfg = _config(args)
    pso = dataclasses.replace(cfg.pso, **{k: v for k, v in (("num_particles", args.particles),
                                                           ("max_iters", args.iters),
                                                           ("box_side_km", args.box_km)) if v is not None})
    cfg = dataclasses.replace(cfg, pso=pso)
    scene, sol = _scene_and_solution(cfg, args.solution)
    rng = trial_rng(cfg.master_seed, 0)
    s = SymbolBlock.draw(sol.M, rng).s
    # synthesize even when loading so the swarm sees the same stream as the dumped run
    obs = synthesize_received(scene, sol, s, scene.alpha, rng, noiseless=args.noiseless)
    if args.load_obs:
        y = load_observation(Path(args.load_obs).read_bytes())
        if y.size != scene.NK:
            raise ConfigurationError(f"observation length {y.size} != NK = {scene.NK}")
        obs = SensingObservation(y, scene.noise_power_w, scene)
    if args.dump_obs:
        Path(args.dump_obs).write_bytes(dump_observation(obs))
    res = pso_locate(obs, scene, sol, s, cfg.pso_config(), rng, box=default_box(scene, pso.box_side_km))
    err_km = float(np.linalg.norm(res.p_hat - scene.target.position_ecef_km))
    out = {"p_hat": [float(v) for v in res.p_hat], "rmse_vs_truth": err_km * 1e3,
           "fitness_trace": [float(v) for v in res.fitness_trace]}
    _emit(args, "locate.json", json.dumps(out, indent=2))
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    scene = build_scene(cfg.scene_config(), cfg.master_seed)
    if cfg.design == "zfbf":
        design = design_for(scene, cfg)
        out = design.solution.to_json()
        out.update(trace=[], rcrb_m=design.rcrb_m, rates_bps_hz=[float(r) for r in design.rates])
    else:
        ocfg = cfg.optimizer_config()
        solve = solve_comm_centric if ocfg.objective_mode == "comm_centric" else solve_sensing_centric
        out = solve(scene, ocfg).to_json()
    _emit(args, "solution.json", json.dumps(out, indent=2))
    return EXIT_OK


def _run_experiment(args, fn) -> int:
    cfg = _config(args)
    table, manifest = fn(cfg)
    if args.out is None:
        sys.stdout.write(table.to_csv())
    else:
        for p in write_results(table, manifest, args.out).values():
            print(p)
    return EXIT_OK


def cmd_sweep(args) -> int:
    def run(cfg):
        values = None
        if args.values is not None:
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if args.axis not in ("collab_type", "array_size"):
                try:
                    values = [float(v) for v in values]
                except ValueError:
                    raise ConfigurationError(f"non-numeric value in --values {args.values!r}") from None
        return sweep(cfg, args.axis, values)
    if args.values is not None and args.axis is None:
        raise ConfigurationError("--values needs --axis")
    return _run_experiment(args, run)


def cmd_montecarlo(args) -> int:
    return _run_experiment(args, run_montecarlo)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file or preset name (fig4, fig5, fig6, fig7, fig9)")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--paper-scale", action="store_true", help=f"use {PAPER_SCALE_TRIALS} trials")

    p = argparse.ArgumentParser(prog="leoisac", description="LEO satellite ISAC workbench")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("constellation", parents=[common], help="satellite ECEF table as CSV")
    c = sub.add_parser("crb", parents=[common], help="position CRB of a solution")
    c.add_argument("--solution", help="solution JSON (default: zero-forcing design)")
    loc = sub.add_parser("locate", parents=[common], help="one PSO localisation run")
    loc.add_argument("--solution")
    loc.add_argument("--box-km", type=float)
    loc.add_argument("--particles", type=int)
    loc.add_argument("--iters", type=int)
    loc.add_argument("--noiseless", action="store_true")
    loc.add_argument("--dump-obs", help="write the observation as a binary dump")
    loc.add_argument("--load-obs", help="read the observation from a binary dump")
    o = sub.add_parser("optimize", parents=[common], help="beamforming design on the base scene")
    o.add_argument("--mode", choices=("sensing", "comm"))
    o.add_argument("--eta", type=float)
    o.add_argument("--eta-crb", type=float)
    o.add_argument("--pmax-dbm", type=float)
    s = sub.add_parser("sweep", parents=[common], help="one-axis sweep to results.csv")
    s.add_argument("--axis")
    s.add_argument("--values", help="comma separated")
    sub.add_parser("montecarlo", parents=[common], help="trials at the base configuration")
    return p


COMMANDS = {"constellation": cmd_constellation, "crb": cmd_crb, "locate": cmd_locate,
            "optimize": cmd_optimize, "sweep": cmd_sweep, "montecarlo": cmd_montecarlo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ParameterError, GroupError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (LeoIsacError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
