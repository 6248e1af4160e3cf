"""Configuration, Monte Carlo experiments, sweeps and the command line."""
from .config import AXES, ExperimentConfig, config_from_dict, load_config, parse_array_size, preset_path
from .experiment import (METRICS, Design, ResultRow, ResultTable, RunManifest, design_for, run_montecarlo,
                         sweep, trial_rng)
from .io import read_results, write_results

__all__ = [
    "AXES", "METRICS", "Design", "ExperimentConfig", "ResultRow", "ResultTable", "RunManifest",
    "config_from_dict", "design_for", "load_config", "parse_array_size", "preset_path", "read_results",
    "run_montecarlo", "sweep", "trial_rng", "write_results",
]
