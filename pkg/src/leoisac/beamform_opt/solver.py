"""Penalty-based SDR loop for the sensing-centric and communication-centric designs."""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from ..crb import crb_trace, evaluate_crb, fim_omega, FimBundle
from ..errors import (BaselineUnavailableError, ConfigurationError, InfeasibleError,
                      NumericalError)
from ..signal_model import BeamformingSolution, all_rates
from .baseline import RATE_SLACK, _eta_vector, phase_one, zfbf_baseline
from .conic import ConicProblem, conic_solve, solver_tol
from .maps import (FimMaps, RateTerms, SchurScaling, assemble_fim_linear_maps,
                   build_power_constraints, build_rate_constraint, build_schur_lmi,
                   extract_rank_one, leading_eigvec, linear_sinr_constraint, penalty_objective,
                   penalty_residual, psd_part, scaled_rate_anchor)

MODES = ("sensing_centric", "comm_centric")  # selects the solve_* entry point


@dataclass(frozen=True)
class OptimizerConfig:
    eta_rate: float = 2.0
    p_max_dbm: float | None = None
    rho0: float = 10.0
    iota: float = 1.5
    delta: float = 1e-4
    max_outer_iters: int = 20
    solver_tol: float | None = None
    objective_mode: str = "sensing_centric"
    eta_crb: float = math.inf
    converge_tol: float = 1e-3
    rate_mode: str = "dca"
    objective_scale: float = 1000.0
    bisection_tol: float = 0.05

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ConfigurationError("rho0 must be > 0")
        if not self.iota > 1:
            raise ConfigurationError("iota must be > 1")
        if not self.delta > 0:
            raise ConfigurationError("delta must be > 0")
        if np.any(np.asarray(self.eta_rate) < 0):
            raise ConfigurationError("rate targets must be >= 0")
        if self.objective_mode not in MODES:
            raise ConfigurationError(f"objective_mode must be one of {MODES}")
        if self.rate_mode not in ("dca", "linear"):
            raise ConfigurationError("rate_mode must be 'dca' or 'linear'")
        if not self.bisection_tol > 0:
            raise ConfigurationError("bisection_tol must be > 0")
        if not self.objective_scale > 0:
            raise ConfigurationError("objective_scale must be > 0")
        if self.max_outer_iters < 1:
            raise ConfigurationError("max_outer_iters must be >= 1")

    @property
    def tol(self) -> float:
        return solver_tol() if self.solver_tol is None else self.solver_tol


@dataclass
class SolveReport:
    solution: BeamformingSolution
    objective_trace: list
    rcrb_trace_m: list
    residual_trace: list
    rho_trace: list
    change_trace: list
    iterations: int
    converged: bool
    W: list
    R: np.ndarray
    U: np.ndarray | None
    rcrb_m: float
    lifted_rcrb_m: float
    rates: np.ndarray
    upsilon: float | None = None
    status: str = "optimal"
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = self.solution.to_json()
        out.update(trace=[float(v) for v in self.objective_trace], rcrb_m=float(self.rcrb_m),
                   rates_bps_hz=[float(r) for r in self.rates], iterations=self.iterations,
                   converged=self.converged, rcrb_trace_m=[float(v) for v in self.rcrb_trace_m])
        if self.upsilon is not None:
            out["upsilon"] = float(self.upsilon)
        return out


def lifted_crb(maps: FimMaps, J: np.ndarray, S: np.ndarray) -> FimBundle:
    F_oo, F_oa, F_aa = maps.evaluate(S)
    b = FimBundle(F_oo, F_oa, F_aa, J)
    F_o = fim_omega(b)
    C, tr = crb_trace(F_o, J, warn=False)
    return FimBundle(F_oo, F_oa, F_aa, J, F_o, C, tr)


def _lift(sol: BeamformingSolution, p_ref: float):
    return [W / p_ref for W in sol.W], sol.R / p_ref


def _initial_point(scene, eta, tol):
    """ZF baseline; falls back to phase 1, which also diagnoses infeasibility."""
    try:
        return zfbf_baseline(scene, eta), None
    except BaselineUnavailableError as exc:
        why = str(exc)
    p1 = phase_one(scene, eta, tol)
    if not p1.feasible:
        binding = "power" if math.isfinite(p1.tau) else "rate"
        raise InfeasibleError(f"rate targets unattainable ({why}); phase-1 budget ratio {p1.tau:.3g}",
                              binding=binding, power_ratio=p1.tau)
    return None, p1


def diagnose_infeasibility(scene, eta, tol=None) -> InfeasibleError:
    """Classify an instance the conic solver already certified infeasible."""
    try:
        p1 = phase_one(scene, eta, tol)
    except NumericalError as exc:
        # very high targets need nulling below solver tolerance; phase 1 cannot tell which family binds
        return InfeasibleError(f"subproblem infeasible; phase-1 diagnosis inconclusive ({exc})")
    if not math.isfinite(p1.tau):
        return InfeasibleError("rate targets infeasible for any power", binding="rate")
    if p1.tau > 1:
        return InfeasibleError(f"needs {p1.tau:.3g}x the power budgets", binding="power", power_ratio=p1.tau)
    return InfeasibleError("subproblem infeasible although rate targets fit the budgets", binding="crb",
                           power_ratio=p1.tau)


class _Subproblem:
    """The penalised CRB subproblem, compiled once with DPP parameters."""

    def __init__(self, scene, cfg: OptimizerConfig, maps: FimMaps, scaling: SchurScaling,
                 terms: RateTerms, eta: np.ndarray):
        N, M, NK = scene.N, scene.M, scene.NK
        self.M, self.NK = M, NK
        self.W = [cp.Variable((NK, NK), hermitian=True, name=f"W{m}") for m in range(M)]
        self.R = cp.Variable((NK, NK), hermitian=True, name="R")
        mats = self.W + [self.R]
        S = self.R + sum(self.W) if M else self.R
        psd = [X >> 0 for X in mats]
        affine = build_power_constraints(S, scene.p_max_w / scaling.p_ref, N)
        exp = []
        self.rho = cp.Parameter(nonneg=True, name="rho")
        self.proj = [(cp.Parameter((NK, NK), name=f"Pr{j}"), cp.Parameter((NK, NK), name=f"Pi{j}"))
                     for j in range(M + 1)]
        self.g = [cp.Parameter(nonneg=True, name=f"g{i}") for i in range(M)]
        self.c = [cp.Parameter(name=f"c{i}") for i in range(M)]
        variables = {f"W{m}": self.W[m] for m in range(M)}
        variables["R"] = self.R
        for i in range(M):
            if cfg.rate_mode == "dca":
                exp.append(build_rate_constraint(terms, self.W, self.R, i, eta[i], self.g[i], self.c[i]))
            else:
                affine.append(linear_sinr_constraint(terms, self.W, self.R, i, float(eta[i])))
        self.U = cp.Variable((3, 3), symmetric=True, name="U")
        self.T = cp.Variable((3, 3), symmetric=True, name="T")
        variables.update(U=self.U, T=self.T)
        I3 = np.eye(3)
        psd.append(cp.bmat([[self.T, I3], [I3, self.U]]) >> 0)
        psd.append(build_schur_lmi(maps, scene.jacobian, S, self.U, scaling))
        obj = cp.trace(self.T) + penalty_objective(mats, self.rho, self.proj)
        self.problem = ConicProblem(variables, obj, "min", psd=psd, exp=exp, affine=affine)

    def set_point(self, W_hat, R_hat, rho: float, terms: RateTerms):
        self.rho.value = rho
        for (Pr, Pi), X in zip(self.proj, list(W_hat) + [R_hat]):
            _, v = leading_eigvec(X)
            P = rho * np.outer(v, v.conj())
            Pr.value, Pi.value = P.real, P.imag
        for i in range(self.M):
            self.g[i].value, self.c[i].value = scaled_rate_anchor(terms, W_hat, R_hat, i)


def _relative_change(old, new) -> float:
    num = sum(np.linalg.norm(a - b) ** 2 for a, b in zip(old, new))
    den = sum(np.linalg.norm(a) ** 2 for a in old)
    return math.sqrt(num / max(den, 1e-300))


def _run(scene, cfg: OptimizerConfig, initial: BeamformingSolution | None = None) -> SolveReport:
    if cfg.p_max_dbm is not None:
        scene = scene.with_power_dbm(cfg.p_max_dbm)
    tol = cfg.tol
    M = scene.M
    eta = _eta_vector(cfg.eta_rate, M)
    p_ref = float(np.max(scene.p_max_w))
    maps = assemble_fim_linear_maps(scene)
    J = scene.jacobian
    terms = RateTerms.from_scene(scene, p_ref)
    notes = []

    if initial is not None:
        W_hat, R_hat = _lift(initial, p_ref)
    else:
        init, p1 = _initial_point(scene, eta, tol)
        if init is not None:
            W_hat, R_hat = _lift(init, p_ref)
        else:
            notes.append("zero-forcing start unavailable, using phase-1 point")
            W_hat, R_hat = [W / p_ref for W in p1.W], p1.R / p_ref
    S0 = p_ref * (R_hat + sum(W_hat, np.zeros_like(R_hat)))
    b0 = lifted_crb(maps, J, S0)
    info_scale = 1.0 / b0.crb_trace
    gamma = math.sqrt(info_scale / b0.F_alpha_alpha)
    scaling = SchurScaling(p_ref, info_scale, gamma)
    sub = _Subproblem(scene, cfg, maps, scaling, terms, eta)

    # rho weighs powers in units of p_ref against the CRB trace expressed
    # so that the starting point scores ``objective_scale``. Dividing rho
    # instead of multiplying the objective keeps the conic data O(1).
    rho_unit = 1.0 / cfg.objective_scale
    rho = cfg.rho0
    obj_trace, rcrb_trace, res_trace, rho_trace, change_trace = [], [], [], [], []
    converged = False
    best = None
    U_val = None
    j = 0
    for j in range(1, cfg.max_outer_iters + 1):
        sub.set_point(W_hat, R_hat, rho * rho_unit, terms)
        res = conic_solve(sub.problem, tol)
        if res.status == "infeasible":
            raise diagnose_infeasibility(scene, eta, tol)
        if not res.ok:
            if best is None:
                raise NumericalError(f"conic backend failed at outer iteration {j}: {res.status}")
            notes.append(f"backend failure at outer iteration {j}; returning last iterate")
            break
        W_new = [psd_part(res.values[f"W{m}"]) for m in range(M)]
        R_new = psd_part(res.values["R"])
        change = _relative_change(W_hat + [R_hat], W_new + [R_new])
        W_hat, R_hat = W_new, R_new
        resid = penalty_residual(W_hat, R_hat)
        S = p_ref * (R_hat + sum(W_hat, np.zeros_like(R_hat)))
        rc = lifted_crb(maps, J, S)
        obj_trace.append(res.objective * cfg.objective_scale)
        rcrb_trace.append(math.sqrt(rc.crb_trace) * 1e3)
        res_trace.append(resid)
        rho_trace.append(rho)
        change_trace.append(change)
        U_val = res.values["U"] * info_scale
        best = j
        if change <= cfg.converge_tol:
            if resid > cfg.delta:
                rho *= cfg.iota
            else:
                converged = True
                break
    if not converged:
        msg = f"penalty loop stopped after {j} outer iterations without convergence"
        notes.append(msg)
        warnings.warn(msg)

    w = np.array([math.sqrt(p_ref) * extract_rank_one(X) for X in W_hat]).reshape(M, scene.NK)
    r = math.sqrt(p_ref) * extract_rank_one(R_hat)
    sol = BeamformingSolution(w, r)
    S = p_ref * (R_hat + sum(W_hat, np.zeros_like(R_hat)))
    lifted = lifted_crb(maps, J, S)
    ext = evaluate_crb(scene, sol, warn=False)
    rates = all_rates(sol, scene) if M else np.zeros(0)
    status = "optimal" if converged else "max_iter"
    short = float(np.max(eta - rates)) if M else 0.0
    if short > RATE_SLACK:
        # rank-one extraction leaks interference that very high SINR targets cannot absorb
        status = "rate_shortfall"
        msg = f"extracted beams miss a rate target by {short:.3g} bit/s/Hz"
        notes.append(msg)
        warnings.warn(msg)
    return SolveReport(
        solution=sol, objective_trace=obj_trace, rcrb_trace_m=rcrb_trace, residual_trace=res_trace,
        rho_trace=rho_trace, change_trace=change_trace, iterations=j, converged=converged, W=[p_ref * X for X in W_hat],
        R=p_ref * R_hat, U=U_val, rcrb_m=ext.rcrb_m, lifted_rcrb_m=lifted.rcrb_m,
        rates=rates, status=status, warnings=notes)


def solve_sensing_centric(scene, cfg: OptimizerConfig = OptimizerConfig(),
                          initial: BeamformingSolution | None = None) -> SolveReport:
    """Minimise the position CRB under per-UE rate and per-satellite power constraints."""
    return _run(scene, cfg, initial)


def rate_upper_bound(scene, p_max_w=None) -> float:
    """log2(1 + max_i ||h_i||^2 sum_k P_k / sigma_i^2): no UE can exceed this rate."""
    p = scene.p_max_w if p_max_w is None else p_max_w
    snr = np.sum(np.abs(scene.h_tilde) ** 2, axis=1) * np.sum(p) / scene.ue_noise_w
    return float(np.log2(1.0 + np.max(snr)))


def solve_comm_centric(scene, cfg: OptimizerConfig, initial: BeamformingSolution | None = None) -> SolveReport:
    """Maximise a common UE rate target subject to a CRB ceiling ``eta_crb`` (km^2).

    The smallest achievable CRB is non-decreasing in the rate target, so the
    largest feasible target is found by bisection over sensing-centric
    solves. ``upsilon`` is that target; the returned design is the
    sensing-centric solution at it. Bisection stops once the bracket is
    narrower than ``bisection_tol`` bit/s/Hz.
    """
    if scene.M < 1:
        raise ConfigurationError("communication-centric design needs at least one UE")
    if not (math.isfinite(cfg.eta_crb) and cfg.eta_crb > 0):
        raise ConfigurationError("communication-centric design needs a finite positive eta_crb")
    if cfg.p_max_dbm is not None:
        scene = scene.with_power_dbm(cfg.p_max_dbm)
        cfg = dataclasses.replace(cfg, p_max_dbm=None)

    history = []

    def probe(eta: float):
        try:
            rep = _run(scene, dataclasses.replace(cfg, eta_rate=eta), initial)
        except InfeasibleError:
            history.append((eta, math.inf))
            return None
        if rep.status == "rate_shortfall":
            history.append((eta, math.inf))
            return None
        crb = (rep.rcrb_m * 1e-3) ** 2
        history.append((eta, crb))
        return rep if crb <= cfg.eta_crb else None

    lo, hi = 0.0, rate_upper_bound(scene)
    best = probe(lo)
    if best is None:
        raise InfeasibleError(f"CRB ceiling {cfg.eta_crb:.3g} km^2 is below the rate-free optimum",
                              binding="crb")
    best_eta = lo
    while hi - lo > cfg.bisection_tol:
        mid = 0.5 * (lo + hi)
        rep = probe(mid)
        if rep is None:
            hi = mid
        else:
            lo, best, best_eta = mid, rep, mid
    best.upsilon = best_eta
    best.warnings.append("bisection probes (eta, crb_km2): "
                         + ", ".join(f"({e:.4g}, {c:.4g})" for e, c in history))
    return best
