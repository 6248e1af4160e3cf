"""Joint communication beamforming and sensing waveform design."""
from .baseline import phase_one, zfbf_baseline, zfbf_max_min
from .conic import ConicProblem, ConicResult, complexify, conic_solve, realify
from .maps import (FimMaps, RateTerms, assemble_fim_linear_maps, build_power_constraints,
                   build_rate_constraint, build_schur_lmi, extract_rank_one, leading_eigvec,
                   penalty_objective, penalty_residual, penalty_term)
from .solver import OptimizerConfig, SolveReport, solve_comm_centric, solve_sensing_centric

__all__ = [
    "ConicProblem", "ConicResult", "FimMaps", "OptimizerConfig", "RateTerms", "SolveReport",
    "assemble_fim_linear_maps", "build_power_constraints", "build_rate_constraint", "build_schur_lmi",
    "complexify", "conic_solve", "extract_rank_one", "leading_eigvec", "penalty_objective",
    "penalty_residual", "penalty_term", "phase_one", "realify", "solve_comm_centric",
    "solve_sensing_centric", "zfbf_baseline", "zfbf_max_min",
]
