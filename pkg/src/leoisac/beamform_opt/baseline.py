"""Zero-forcing baseline and the phase-1 feasibility diagnosis."""
from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from ..errors import BaselineUnavailableError, NumericalError
from ..signal_model import BeamformingSolution, ue_rate_lifted
from .conic import ConicProblem, conic_solve, hermitian_inner
from .maps import assemble_fim_linear_maps, block_trace, psd_part

# tolerated shortfall of a lifted rate before a phase-1 point is rejected
RATE_SLACK = 0.05


def _eta_vector(eta, m: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(eta, dtype=float), (m,)).copy()


def zf_directions(h_tilde: np.ndarray) -> np.ndarray:
    """Columns H (H^H H)^-1 with H = [h_1, ..., h_M]; h_i^H col_m = delta_im."""
    H = h_tilde.T
    m = H.shape[1]
    if H.shape[0] < m or np.linalg.matrix_rank(H) < m:
        raise BaselineUnavailableError("stacked UE channels are rank deficient")
    return H @ np.linalg.inv(H.conj().T @ H)


def sensing_direction(scene, blocked: np.ndarray | None = None) -> np.ndarray:
    """Dominant eigenvector of sum_a E_a^H E_a, restricted to the complement of ``blocked``."""
    maps = assemble_fim_linear_maps(scene)
    E = maps.position_operators(scene.jacobian)
    G = np.einsum("anm,anl->ml", E.conj(), E)
    if blocked is not None and blocked.size:
        Q, _ = np.linalg.qr(blocked)
        P = np.eye(G.shape[0]) - Q @ Q.conj().T
        G = P @ G @ P
    G = (G + G.conj().T) / 2
    _, vecs = np.linalg.eigh(G)
    v = vecs[:, -1]
    return v * (abs(v[0]) / v[0]) if abs(v[0]) > 0 else v


def zfbf_baseline(scene, eta) -> BeamformingSolution:
    """ZF beams meeting each rate target with equality plus a null-space sensing waveform.

    The waveform lies in the orthogonal complement of the UE channels, so
    UEs see no interference, and it is scaled to the largest value that
    keeps every satellite inside its remaining budget.
    """
    K, N, M = scene.K, scene.N, scene.M
    if M:
        cols = zf_directions(scene.h_tilde)
        eta = _eta_vector(eta, M)
        amp = np.sqrt((2.0 ** eta - 1.0) * scene.ue_noise_w)
        w = (cols * amp[None, :]).T
    else:
        w = np.zeros((0, scene.NK), dtype=complex)
    used = np.array([np.sum(np.abs(w[:, k * N:(k + 1) * N]) ** 2) for k in range(K)])
    left = scene.p_max_w - used
    if np.any(left < 0):
        raise BaselineUnavailableError("zero-forcing beams alone exceed a power budget")
    r = sensing_direction(scene, scene.h_tilde.T if M else None)
    per = np.array([np.sum(np.abs(r[k * N:(k + 1) * N]) ** 2) for k in range(K)])
    active = per > 1e-14
    scale = np.sqrt(np.min(left[active] / per[active])) if np.any(active) else 0.0
    return BeamformingSolution(w, scale * r)


def zfbf_max_min(scene) -> BeamformingSolution:
    """ZF beams sharing one common amplitude pushed to the tightest budget, no waveform."""
    cols = zf_directions(scene.h_tilde)
    amp = np.sqrt(scene.ue_noise_w)
    w = (cols * amp[None, :]).T
    N = scene.N
    used = np.array([np.sum(np.abs(w[:, k * N:(k + 1) * N]) ** 2) for k in range(scene.K)])
    t = np.sqrt(np.min(scene.p_max_w[used > 0] / used[used > 0]))
    return BeamformingSolution(t * w, np.zeros(scene.NK, dtype=complex))


@dataclass
class PhaseOneResult:
    tau: float
    feasible: bool
    W: list
    R: np.ndarray
    status: str


def phase_one(scene, eta, tol: float | None = None) -> PhaseOneResult:
    """min tau s.t. lifted SINR targets and per-satellite power <= tau * P_k.

    ``tau <= 1`` means the rate targets fit the budgets. The returned lifted
    point (in watts) is a valid SCA anchor in that case.

    Powers are measured in units of the largest single-user requirement
    ``(2^eta_i - 1) sigma_i^2 / ||h_i||^2`` and each SINR row is divided by
    its target, so the rows stay O(1) however high the link SNR is.
    """
    K, N, M, NK = scene.K, scene.N, scene.M, scene.NK
    eta = _eta_vector(eta, M)
    gain = np.sum(np.abs(scene.h_tilde) ** 2, axis=1) / scene.ue_noise_w if M else np.ones(0)
    need = (2.0 ** eta - 1.0) / gain if M else np.zeros(0)
    p_ref = float(np.max(need)) if M and np.max(need) > 0 else float(np.max(scene.p_max_w))
    W = [cp.Variable((NK, NK), hermitian=True, name=f"W{m}") for m in range(M)]
    R = cp.Variable((NK, NK), hermitian=True, name="R")
    t = cp.Variable(name="t")  # tau * max(P_k) / p_ref
    S = R + sum(W) if M else R
    psd = [X >> 0 for X in W + [R]]
    aff = []
    for i in range(M):
        h = scene.h_tilde[i]
        Hn = np.outer(h, h.conj()) / np.sum(np.abs(h) ** 2)
        a = gain[i] * p_ref
        tr = [hermitian_inner(Wm, Hn) for Wm in W]
        interf = sum(tr[:i] + tr[i + 1:]) + hermitian_inner(R, Hn)
        target = 2.0 ** eta[i] - 1.0
        if target > 0:
            aff.append((a / target) * tr[i] - a * interf >= 1.0)
    p_top = float(np.max(scene.p_max_w))
    aff += [block_trace(S, k, N) <= t * scene.p_max_w[k] / p_top for k in range(K)]
    variables = {f"W{m}": W[m] for m in range(M)}
    variables.update(R=R, t=t)
    res = conic_solve(ConicProblem(variables, t, psd=psd, affine=aff), tol)
    if res.status == "infeasible":
        return PhaseOneResult(float("inf"), False, [], np.zeros((NK, NK)), res.status)
    if not res.ok:
        raise NumericalError(f"phase-1 solve failed: {res.status}")
    tau = max(float(res.values["t"]), 0.0) * p_ref / p_top
    Wv = [p_ref * psd_part(res.values[f"W{m}"]) for m in range(M)]
    Rv = p_ref * psd_part(res.values["R"])
    short = [eta[i] - ue_rate_lifted(Wv, Rv, scene.h_tilde, i, scene.ue_noise_w[i]) for i in range(M)]
    if short and max(short) > RATE_SLACK:
        # rows needing deeper nulling than the solver tolerance can resolve
        raise NumericalError(f"phase-1 point misses a rate target by {max(short):.3g} bit/s/Hz")
    return PhaseOneResult(tau, tau <= 1 + 1e-9, Wv, Rv, res.status)
