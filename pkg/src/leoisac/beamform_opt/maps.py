"""Lifted-domain building blocks: FIM maps, Schur LMI, rate/power constraints, penalty."""
from __future__ import annotations

import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from ..crb import sensing_operators
from ..errors import AnchorError
from .conic import hermitian_inner

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FimMaps:
    """Linear maps from S = R + sum_m W_m to the FIM blocks.

    ``[F_oo]_ij = c_oo Re tr(S D_i^H D_j)``, ``[F_oa]_i = c_oa Re tr(S D_i^H At)``,
    ``F_aa = c_aa tr(S At^H At)``.
    """
    D: np.ndarray
    At: np.ndarray
    c_oo: float
    c_oa: float
    c_aa: float

    def evaluate(self, S: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        DS = self.D @ S
        F_oo = self.c_oo * np.real(np.einsum("inm,jnm->ij", self.D.conj(), DS))
        AS = self.At @ S
        F_oa = self.c_oa * np.real(np.einsum("inm,nm->i", self.D.conj(), AS))
        F_aa = self.c_aa * float(np.real(np.sum(self.At.conj() * AS)))
        return (F_oo + F_oo.T) / 2, F_oa, F_aa

    def evaluate_lifted(self, W: list[np.ndarray], R: np.ndarray):
        return self.evaluate(R + sum(W, np.zeros_like(R)))

    def position_operators(self, J: np.ndarray) -> np.ndarray:
        """E_a = sum_i J_ia D_i, shape (3, NK, NK)."""
        return np.einsum("ia,inm->anm", J, self.D)


def assemble_fim_linear_maps(scene, alpha: float | None = None, sigma2: float | None = None) -> FimMaps:
    alpha = scene.alpha if alpha is None else alpha
    sigma2 = scene.noise_power_w if sigma2 is None else sigma2
    At, D = sensing_operators(scene)
    return FimMaps(D, At, 2 * alpha ** 2 / sigma2, 2 * alpha / sigma2, 2 / sigma2)


@dataclass(frozen=True)
class SchurScaling:
    """S = p_ref * S_hat; information divided by ``info_scale``; alpha row scaled by ``gamma``."""
    p_ref: float = 1.0
    info_scale: float = 1.0
    gamma: float = 1.0


def schur_matrix_numeric(maps: FimMaps, J: np.ndarray, S: np.ndarray, U: np.ndarray,
                         scaling: SchurScaling = SchurScaling()) -> np.ndarray:
    """The 4x4 LMI matrix evaluated at a numeric S (watts) and U (unscaled)."""
    F_oo, F_oa, F_aa = maps.evaluate(S)
    top = J.T @ F_oo @ J - U
    col = J.T @ F_oa
    L = np.zeros((4, 4))
    L[:3, :3] = top / scaling.info_scale
    L[:3, 3] = L[3, :3] = scaling.gamma * col / scaling.info_scale
    L[3, 3] = scaling.gamma ** 2 * F_aa / scaling.info_scale
    return L


def schur_lmi_expression(maps: FimMaps, J: np.ndarray, S_hat, U_hat, scaling: SchurScaling):
    """4x4 affine expression [[J^T F_oo J - U, J^T F_oa], [., F_aa]] in scaled units."""
    E = maps.position_operators(J)
    k = scaling.p_ref / scaling.info_scale
    entries = [[None] * 4 for _ in range(4)]
    for a in range(3):
        for b in range(a, 3):
            e = k * maps.c_oo * hermitian_inner(S_hat, E[a].conj().T @ E[b]) - U_hat[a, b]
            entries[a][b] = e
            entries[b][a] = e
        e = scaling.gamma * k * maps.c_oa * hermitian_inner(S_hat, E[a].conj().T @ maps.At)
        entries[a][3] = e
        entries[3][a] = e
    entries[3][3] = scaling.gamma ** 2 * k * maps.c_aa * hermitian_inner(S_hat, maps.At.conj().T @ maps.At)
    return cp.bmat([[cp.reshape(e, (1, 1), order="F") for e in row] for row in entries])


def build_schur_lmi(maps: FimMaps, J: np.ndarray, S_hat, U_hat, scaling: SchurScaling = SchurScaling()):
    """PSD constraint on the symmetrised 4x4 Schur block."""
    L = schur_lmi_expression(maps, J, S_hat, U_hat, scaling)
    return (L + L.T) / 2 >> 0


@dataclass(frozen=True)
class RateTerms:
    """Per-UE normalised channel outer products ``H_i / c_i`` and noise ``1 / c_i``.

    ``c_i = ||h_i||^2 p_ref / sigma_i^2`` keeps each constraint row O(1).
    """
    Hn: np.ndarray      # (M, NK, NK)
    noise: np.ndarray   # (M,)

    @classmethod
    def from_scene(cls, scene, p_ref: float) -> "RateTerms":
        h = scene.h_tilde * np.sqrt(p_ref / scene.ue_noise_w)[:, None]
        c = np.sum(np.abs(h) ** 2, axis=1)
        Hn = np.einsum("mi,mj->mij", h, h.conj()) / c[:, None, None]
        return cls(Hn, 1.0 / c)

    def received(self, W_hat: list, R_hat, i: int) -> tuple[float, float]:
        """(total, interference-plus-noise), numeric, in normalised units."""
        t = [float(np.real(np.trace(Wm @ self.Hn[i]))) for Wm in W_hat]
        tr = float(np.real(np.trace(R_hat @ self.Hn[i])))
        tot = sum(t) + tr + self.noise[i]
        return tot, tot - t[i]

    def expressions(self, W_hat: list, R_hat, i: int):
        t = [hermitian_inner(Wm, self.Hn[i]) for Wm in W_hat]
        tot = sum(t) + hermitian_inner(R_hat, self.Hn[i]) + self.noise[i]
        return tot, tot - t[i]


def rate_anchor(terms: RateTerms, W_hat: list, R_hat, i: int) -> tuple[float, float]:
    """Linearisation coefficients (a_i, b_i) of log2(interference) at the anchor.

    ``log2(I) ~= a_i + b_i * I`` with ``b_i = 1/(I# ln 2)`` and
    ``a_i = log2(I#) - 1/ln 2``.
    """
    _, interf = terms.received(W_hat, R_hat, i)
    if not interf > 0:
        raise AnchorError(f"non-positive interference-plus-noise at anchor for UE {i}")
    return math.log2(interf) - 1 / LN2, 1 / (interf * LN2)


def build_rate_constraint(terms: RateTerms, W_hat: list, R_hat, i: int, eta, g_i, c_i):
    """DC-linearised rate row ``log2(total) - (a_i + b_i * interference) >= eta``.

    The row is multiplied through by the anchor interference ``g_i = I#``
    (so ``b_i = 1/(g_i ln 2)``), which keeps every coefficient O(1) even
    when ``I#`` is at the noise floor. ``c_i = g_i (ln g_i - 1)`` collects
    the constant part. ``g_i`` and ``c_i`` may be cvxpy parameters and
    ``eta`` a variable.
    """
    tot, interf = terms.expressions(W_hat, R_hat, i)
    return g_i * cp.log(tot) - interf >= g_i * LN2 * eta + c_i


def scaled_rate_anchor(terms: RateTerms, W_hat: list, R_hat, i: int) -> tuple[float, float]:
    """(g_i, c_i) for :func:`build_rate_constraint` at the anchor."""
    _, b = rate_anchor(terms, W_hat, R_hat, i)
    g = 1.0 / (b * LN2)
    return g, g * (math.log(g) - 1.0)


def linear_sinr_constraint(terms: RateTerms, W_hat: list, R_hat, i: int, eta: float):
    """Exact lifted SINR form: signal >= (2^eta - 1) * interference-plus-noise."""
    tot, interf = terms.expressions(W_hat, R_hat, i)
    return tot - interf >= (2 ** eta - 1) * interf


def lifted_rate(terms: RateTerms, W_hat: list, R_hat, i: int) -> float:
    tot, interf = terms.received(W_hat, R_hat, i)
    return math.log2(tot / interf)


def linearized_rate(terms: RateTerms, W_hat: list, R_hat, i: int, anchor: tuple[float, float]) -> float:
    """log2(total) - (a + b * interference): the DC surrogate, <= the true rate."""
    tot, interf = terms.received(W_hat, R_hat, i)
    return math.log2(tot) - (anchor[0] + anchor[1] * interf)


def block_trace(S, k: int, n: int):
    blk = slice(k * n, (k + 1) * n)
    return cp.real(cp.trace(S[blk, blk]))


def build_power_constraints(S_hat, p_max_hat: np.ndarray, n: int) -> list:
    return [block_trace(S_hat, k, n) <= p_max_hat[k] for k in range(len(p_max_hat))]


def power_slack(W: list[np.ndarray], R: np.ndarray, p_max: np.ndarray, n: int) -> np.ndarray:
    S = R + sum(W, np.zeros_like(R))
    used = np.array([np.real(np.trace(S[k * n:(k + 1) * n, k * n:(k + 1) * n])) for k in range(len(p_max))])
    return np.asarray(p_max, dtype=float) - used


def leading_eigvec(X: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a deterministic unit eigenvector.

    Among (numerically) repeated top eigenvalues the vector with the largest
    first-entry magnitude is chosen; its first entry is made real and >= 0.
    """
    X = (X + X.conj().T) / 2
    lam, Q = np.linalg.eigh(X)
    top = lam[-1]
    tie = np.abs(lam - top) <= 1e-10 * max(abs(top), 1e-300)
    cand = Q[:, tie]
    j = int(np.argmax(np.abs(cand[0])))
    v = cand[:, j]
    if abs(v[0]) > 0:
        v = v * (abs(v[0]) / v[0])
    return float(top), v


def psd_part(X: np.ndarray) -> np.ndarray:
    """Nearest Hermitian PSD matrix; removes solver slack below zero."""
    X = (X + X.conj().T) / 2
    lam, Q = np.linalg.eigh(X)
    return (Q * np.maximum(lam, 0.0)) @ Q.conj().T


def extract_rank_one(X: np.ndarray) -> np.ndarray:
    """sqrt(lambda_max) times the leading eigenvector."""
    lam, v = leading_eigvec(X)
    return math.sqrt(max(lam, 0.0)) * v


def penalty_term(X: np.ndarray, v: np.ndarray) -> float:
    """tr X - v^H X v, an upper bound on tr X - lambda_max X for unit v."""
    return float(np.real(np.trace(X) - np.vdot(v, X @ v)))


def penalty_residual(W: list[np.ndarray], R: np.ndarray) -> float:
    """sum_m (tr W_m - lambda_max W_m) + tr R - lambda_max R."""
    total = 0.0
    for X in list(W) + [R]:
        X = (X + X.conj().T) / 2
        total += float(np.real(np.trace(X)) - np.linalg.eigvalsh(X)[-1])
    return total


def penalty_objective(mats: list, rho, projectors: list):
    """rho * sum (tr X - v^H X v) as a cvxpy expression.

    ``projectors`` holds ``(Re P, Im P)`` pairs of ``P = rho * v v^H``
    (arrays or parameters), so the expression stays affine in the
    parameters when ``rho`` is one.
    """
    terms = [rho * cp.real(cp.trace(X)) - cp.sum(cp.multiply(cp.real(X), Pr))
             - cp.sum(cp.multiply(cp.imag(X), Pi)) for X, (Pr, Pi) in zip(mats, projectors)]
    return sum(terms) if terms else cp.Constant(0.0)
