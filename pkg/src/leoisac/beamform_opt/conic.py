"""Thin conic-programming layer over cvxpy with Clarabel (SCS as fallback)."""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Any

import cvxpy as cp
import numpy as np

DEFAULT_TOL = 1e-8


def solver_tol(default: float = DEFAULT_TOL) -> float:
    """Solver tolerance, overridable with LEOISAC_SOLVER_TOL."""
    raw = os.environ.get("LEOISAC_SOLVER_TOL")
    if raw is None or raw == "":
        return default
    val = float(raw)
    if not val > 0:
        raise ValueError("LEOISAC_SOLVER_TOL must be positive")
    return val


@dataclass
class ConicProblem:
    """Named variables plus an objective and constraints grouped by cone."""
    variables: dict[str, cp.Variable]
    objective: cp.Expression
    sense: str = "min"
    psd: list = field(default_factory=list)
    exp: list = field(default_factory=list)
    affine: list = field(default_factory=list)
    _compiled: cp.Problem | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        declared = {id(v) for v in self.variables.values()}
        for c in self.constraints:
            for v in c.variables():
                if id(v) not in declared:
                    raise ValueError(f"constraint references undeclared variable {v.name()}")

    @property
    def constraints(self) -> list:
        return list(self.psd) + list(self.exp) + list(self.affine)

    def compile(self) -> cp.Problem:
        """The cvxpy problem, built once so parameter updates reuse the canonicalisation."""
        if self._compiled is None:
            obj = cp.Minimize(self.objective) if self.sense == "min" else cp.Maximize(self.objective)
            self._compiled = cp.Problem(obj, self.constraints)
        return self._compiled


@dataclass
class ConicResult:
    status: str  # optimal | infeasible | unbounded | max_iter | numerical_failure
    objective: float
    values: dict[str, np.ndarray]
    solver: str
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


_STATUS = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "optimal",
    cp.INFEASIBLE: "infeasible",
    cp.INFEASIBLE_INACCURATE: "infeasible",
    cp.UNBOUNDED: "unbounded",
    cp.UNBOUNDED_INACCURATE: "unbounded",
    cp.USER_LIMIT: "max_iter",
}


def _solve_once(prob: cp.Problem, solver: str, tol: float, max_iters: int):
    if solver == "CLARABEL":
        opts = dict(tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol, max_iter=max_iters)
    else:
        opts = dict(eps=max(tol, 1e-9), max_iters=max_iters * 100)
    prob.solve(solver=solver, **opts)


def conic_solve(problem: ConicProblem | cp.Problem, tol: float | None = None, max_iters: int = 200,
                solvers=("CLARABEL", "SCS")) -> ConicResult:
    """Solve and map the backend status onto a small fixed vocabulary.

    An ``optimal_inaccurate`` status is accepted but recorded in ``info``.
    Backend exceptions fall through to the next solver; if all fail the
    status is ``numerical_failure``.
    """
    tol = solver_tol() if tol is None else tol
    prob = problem.compile() if isinstance(problem, ConicProblem) else problem
    errors = {}
    for name in solvers:
        if name not in cp.installed_solvers():
            continue
        try:
            _solve_once(prob, name, tol, max_iters)
        except cp.error.SolverError as exc:
            errors[name] = str(exc)
            continue
        status = _STATUS.get(prob.status, "numerical_failure")
        if status == "numerical_failure":
            errors[name] = str(prob.status)
            continue
        values = {}
        if isinstance(problem, ConicProblem) and status == "optimal":
            values = {k: np.array(v.value) for k, v in problem.variables.items()}
        info = {"raw_status": prob.status, "errors": errors}
        if prob.status == cp.OPTIMAL_INACCURATE:
            warnings.warn(f"{name} returned an inaccurate solution")
        obj = float(prob.value) if prob.value is not None and np.isfinite(prob.value) else float("nan")
        return ConicResult(status, obj, values, name, info)
    return ConicResult("numerical_failure", float("nan"), {}, ",".join(solvers), {"errors": errors})


def hermitian_inner(S, Q: np.ndarray):
    """Re tr(S Q) for a Hermitian cvxpy expression ``S`` and a constant matrix ``Q``."""
    Qh = (Q + Q.conj().T) / 2
    return cp.sum(cp.multiply(cp.real(S), Qh.real)) + cp.sum(cp.multiply(cp.imag(S), Qh.imag))


def realify(X: np.ndarray) -> np.ndarray:
    """[[Re X, -Im X], [Im X, Re X]]; Hermitian PSD maps to symmetric PSD."""
    X = np.asarray(X)
    return np.block([[X.real, -X.imag], [X.imag, X.real]])


def complexify(Y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`realify` (averages the redundant blocks)."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] // 2
    re = (Y[:n, :n] + Y[n:, n:]) / 2
    im = (Y[n:, :n] - Y[:n, n:]) / 2
    return re + 1j * im


def realify_vector(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag])
