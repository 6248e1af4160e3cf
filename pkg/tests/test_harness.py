import dataclasses
import json

import numpy as np
import pytest
import yaml

from leoisac.errors import ConfigurationError, ExperimentAbortedError
from leoisac.harness import (ExperimentConfig, ResultTable, config_from_dict, load_config, preset_path,
                             read_results, run_montecarlo, sweep, trial_rng, write_results)
from leoisac.harness import experiment as ex
from leoisac.harness.cli import main
from leoisac.signal_model import load_observation

FAST = {
    "array": {"nx": 2, "nz": 2},
    "group": {"num_sats": 2},
    "ue": {"num_ues": 2},
    "pso": {"num_particles": 12, "max_iters": 6},
    "num_trials": 4,
    "design": "zfbf",
}


@pytest.fixture(scope="module")
def fast_cfg():
    return config_from_dict(FAST)


# -- configuration -----------------------------------------------------------

def test_empty_config_gives_table_defaults():
    cfg = config_from_dict({})
    assert cfg == ExperimentConfig()
    d = cfg.to_dict()
    assert d["group"]["num_sats"] == 5 and d["ue"]["num_ues"] == 10
    assert (d["array"]["nx"], d["array"]["nz"]) == (4, 4)
    assert d["optimizer"]["pmax_dbm"] == 30.0 and d["optimizer"]["eta_rate"] == 2.0
    assert d["constellation"]["num_planes"] == 72 and d["constellation"]["sats_per_plane"] == 22


def test_load_none_and_empty_file(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("", encoding="utf-8")
    assert load_config(p) == load_config(None) == ExperimentConfig()


@pytest.mark.parametrize("data", [{"pmax_dbm": 30}, {"optimizer": {"pmax": 30}}, {"pso": {"particles": 3}}])
def test_unknown_keys_are_errors(data):
    with pytest.raises(ConfigurationError, match="unknown key"):
        config_from_dict(data)


@pytest.mark.parametrize("data", [{"num_trials": 0}, {"design": "oracle"}, {"workers": 0},
                                  {"sweep": {"axis": "bogus", "values": [1]}},
                                  {"sweep": {"axis": "eta"}}, {"num_trials": 2.5},
                                  {"optimizer": {"pmax_dbm": "high"}}])
def test_invalid_values_are_errors(data):
    with pytest.raises(ConfigurationError):
        config_from_dict(data)


def test_malformed_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("array: {nx: 2\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="malformed"):
        load_config(p)


def test_pmax_round_trips_through_manifest(fast_cfg):
    cfg = dataclasses.replace(fast_cfg, num_trials=1,
                              optimizer=dataclasses.replace(fast_cfg.optimizer, pmax_dbm=30))
    _, man = run_montecarlo(cfg)
    back = json.loads(man.to_json())
    assert back["config"]["optimizer"]["pmax_dbm"] == 30.0
    assert config_from_dict(back["config"]) == cfg


@pytest.mark.parametrize("name", ["fig4", "fig5", "fig6", "fig7", "fig9"])
def test_presets_load(name):
    cfg = load_config(preset_path(name))
    assert cfg.sweep.axis is not None and len(cfg.sweep.values) >= 2
    assert cfg.num_trials == 100
    for v in cfg.sweep.values:
        cfg.at(cfg.sweep.axis, v).scene_config()


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        preset_path("fig99")


def test_axis_pinning():
    cfg = ExperimentConfig()
    assert cfg.at("pmax_dbm", 40).optimizer.pmax_dbm == 40.0
    assert cfg.at("eta", 3).optimizer.eta_rate == 3.0
    assert cfg.at("collab_type", "iii").group.num_sats == 7
    assert (cfg.at("array_size", "2x4").array.nx, cfg.at("array_size", "2x4").array.nz) == (2, 4)
    assert cfg.at("sats_per_plane", 44).constellation.sats_per_plane == 44
    with pytest.raises(ConfigurationError):
        cfg.at("array_size", "big")


# -- seeding -----------------------------------------------------------------

def test_trial_streams_depend_only_on_index():
    a = trial_rng(7, 3).standard_normal(4)
    assert np.array_equal(a, trial_rng(7, 3).standard_normal(4))
    assert not np.array_equal(a, trial_rng(7, 4).standard_normal(4))
    assert not np.array_equal(a, trial_rng(8, 3).standard_normal(4))


def test_trial_order_does_not_change_aggregates(fast_cfg):
    point = fast_cfg.at(None, None)
    frozen = ex._design_or_failure(point, point.scene_config(), 0, None)
    fwd = ex._run_trials(fast_cfg, point, [0, 1, 2, 3], frozen, None)
    rev = ex._run_trials(fast_cfg, point, [3, 1, 0, 2], frozen, None)
    rev.sort(key=lambda o: o.trial)
    assert ex._aggregate("x", fwd) == ex._aggregate("x", rev)


def test_worker_count_does_not_change_results(fast_cfg):
    one, _ = run_montecarlo(fast_cfg)
    two, _ = run_montecarlo(dataclasses.replace(fast_cfg, workers=2))
    assert one.to_csv() == two.to_csv()


# -- results and persistence ---------------------------------------------------

def test_montecarlo_table_shape(fast_cfg):
    table, man = run_montecarlo(fast_cfg)
    assert {r.metric for r in table.rows} == set(ex.METRICS)
    assert all(r.sweep_value == "default" for r in table.rows)
    assert table.get("rmse_m", "default").n == fast_cfg.num_trials
    assert table.get("iterations", "default").mean == 0.0
    assert len(man.trial_seeds) == fast_cfg.num_trials and man.infeasible == 0
    assert "default" in man.timing["wall_time_s"]


def test_csv_round_trip_and_format(fast_cfg, tmp_path):
    table, man = sweep(fast_cfg, "pmax_dbm", [20.0, 40.0])
    paths = write_results(table, man, tmp_path)
    raw = paths["results"].read_bytes()
    assert raw.startswith(b"sweep_value,metric,mean,std,n\r\n")
    assert raw.count(b"\r\n") == len(table.rows) + 1
    assert read_results(paths["results"]) == table
    assert json.loads(paths["manifest"].read_text(encoding="utf-8"))["master_seed"] == 0
    with pytest.raises(ValueError):
        ResultTable.from_csv("a,b\r\n")


def test_identical_runs_give_identical_bytes(fast_cfg, tmp_path):
    a, ma = sweep(fast_cfg, "pmax_dbm", [20.0, 40.0])
    b, mb = sweep(fast_cfg, "pmax_dbm", [20.0, 40.0])
    assert a.to_csv().encode() == b.to_csv().encode()
    assert ma.config_hash == mb.config_hash and ma.trial_seeds == mb.trial_seeds


def test_power_sweep_lowers_rcrb(fast_cfg):
    table, _ = sweep(fast_cfg, "pmax_dbm", [20.0, 30.0, 40.0])
    r = [m for _, m in table.series("rcrb_m")]
    assert r[0] > r[1] > r[2]


def test_sweep_needs_values(fast_cfg):
    with pytest.raises(ConfigurationError):
        sweep(fast_cfg, "eta", [])
    with pytest.raises(ConfigurationError):
        sweep(fast_cfg, "collab_type", ["IV"])


def test_mass_failure_aborts(fast_cfg):
    cfg = dataclasses.replace(fast_cfg, design="alg2", num_trials=2,
                              optimizer=dataclasses.replace(fast_cfg.optimizer, pmax_dbm=-70.0))
    with pytest.raises(ExperimentAbortedError):
        run_montecarlo(cfg)


# -- command line --------------------------------------------------------------

@pytest.fixture
def fast_yaml(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text(yaml.safe_dump(FAST), encoding="utf-8")
    return str(p)


def test_cli_constellation(capsys):
    assert main(["constellation"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "plane,slot,x_km,y_km,z_km" and len(lines) == 72 * 22 + 1


def test_cli_crb_json(capsys, fast_yaml):
    assert main(["crb", "--config", fast_yaml]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rcrb_m"] == pytest.approx(np.sqrt(out["trace_crb_km2"]) * 1e3)
    assert len(out["per_axis_crb"]) == 3


def test_cli_locate_dump_and_reload(capsys, fast_yaml, tmp_path):
    dump = tmp_path / "obs.bin"
    assert main(["locate", "--config", fast_yaml, "--dump-obs", str(dump)]) == 0
    first = json.loads(capsys.readouterr().out)
    blob = dump.read_bytes()
    assert blob[:4] == b"LISY" and load_observation(blob).size == 8
    assert main(["locate", "--config", fast_yaml, "--load-obs", str(dump)]) == 0
    assert json.loads(capsys.readouterr().out)["p_hat"] == first["p_hat"]


def test_cli_sweep_to_directory(fast_yaml, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["sweep", "--config", fast_yaml, "--axis", "eta", "--values", "1,2", "--out", str(out)]) == 0
    table = read_results(out / "results.csv")
    assert [v for v, _ in table.series("rcrb_m")] == ["1", "2"]


@pytest.mark.parametrize("argv", [["crb", "--config", "fig99"],
                                  ["sweep", "--axis", "eta", "--values", "one,two"],
                                  ["sweep", "--values", "1,2"]])
def test_cli_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_infeasible_exit_3(tmp_path, capsys):
    p = tmp_path / "alg2.yaml"
    p.write_text(yaml.safe_dump(dict(FAST, design="alg2")), encoding="utf-8")
    assert main(["optimize", "--config", str(p), "--pmax-dbm", "-70"]) == 3
    assert "infeasible" in capsys.readouterr().err
