"""Fisher information for (angles, alpha) and the position CRB."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import steering_phase_derivatives, steering_vector
from .errors import SingularNuisanceError, UnobservableGeometryError
from .geometry import target_angles_batch

PINV_FLOOR = 1e-12


@dataclass(frozen=True)
class SteeringDerivatives:
    """dA/dOmega_i for Omega = [theta_1..theta_K, phi_1..phi_K], each NK x NK."""
    dA: np.ndarray  # (2K, NK, NK)


@dataclass(frozen=True)
class FimBundle:
    F_omega_omega: np.ndarray
    F_omega_alpha: np.ndarray
    F_alpha_alpha: float
    J: np.ndarray
    F_omega: np.ndarray | None = None
    crb_matrix: np.ndarray | None = None
    crb_trace: float | None = None

    @property
    def full(self) -> np.ndarray:
        """F_Xi with Xi = [Omega; alpha]."""
        n = len(self.F_omega_alpha)
        F = np.zeros((n + 1, n + 1))
        F[:n, :n] = self.F_omega_omega
        F[:n, n] = F[n, :n] = self.F_omega_alpha
        F[n, n] = self.F_alpha_alpha
        return F

    @property
    def rcrb_m(self) -> float:
        return float(np.sqrt(self.crb_trace) * 1e3)


def stacked_derivatives(positions_km, p, arr) -> tuple[np.ndarray, np.ndarray]:
    """Stacked steering vector and d(a_stack)/dOmega_i as rows (2K, NK)."""
    th, ph = target_angles_batch(positions_km, np.asarray(p, dtype=float))
    a = steering_vector(th, ph, arr)  # (K, N)
    dth, dph = steering_phase_derivatives(th, ph, arr)
    K, N = a.shape
    da = np.zeros((2 * K, K * N), dtype=complex)
    for k in range(K):
        da[k, k * N:(k + 1) * N] = 1j * dth[k] * a[k]
        da[K + k, k * N:(k + 1) * N] = 1j * dph[k] * a[k]
    return a.reshape(-1), da


def steering_derivatives(scene) -> SteeringDerivatives:
    """Product rule on A = a a^H: dA = (da) a^H + a (da)^H."""
    a, da = stacked_derivatives(scene.positions_km, scene.target.position_ecef_km, scene.arr)
    dA = np.einsum("in,m->inm", da, a.conj()) + np.einsum("n,im->inm", a, da.conj())
    return SteeringDerivatives(dA)


def sensing_operators(scene) -> tuple[np.ndarray, np.ndarray]:
    """A o B and the stack D_i = dA/dOmega_i o B."""
    A, B = scene.matrices
    dA = steering_derivatives(scene).dA
    return A * B, dA * B[None]


def _reduce(F_oo, F_oa, F_aa, J, name_warn=True):
    bundle = FimBundle(F_oo, F_oa, F_aa, J)
    F_o = fim_omega(bundle)
    C, tr = crb_trace(F_o, J, warn=name_warn)
    return FimBundle(F_oo, F_oa, F_aa, J, F_o, C, tr)


def fim_blocks(scene, sol, alpha: float | None = None, sigma2: float | None = None) -> FimBundle:
    """Analytic FIM blocks with the symbol expectation taken in closed form.

    With S = R + sum_m W_m = X X^H the entries are
    ``(2 a^2/s2) Re tr(S D_i^H D_j)``, ``(2/s2) Re tr(S At^H At)`` and
    ``(2a/s2) Re tr(S D_i^H At)``.
    """
    alpha = scene.alpha if alpha is None else alpha
    sigma2 = scene.noise_power_w if sigma2 is None else sigma2
    At, D = sensing_operators(scene)
    X = sol.X
    G = D @ X            # (2K, NK, M+1)
    g0 = At @ X
    F_oo = (2 * alpha ** 2 / sigma2) * np.real(np.einsum("inc,jnc->ij", G.conj(), G))
    F_oa = (2 * alpha / sigma2) * np.real(np.einsum("inc,nc->i", G.conj(), g0))
    F_aa = float((2 / sigma2) * np.real(np.vdot(g0, g0)))
    F_oo = (F_oo + F_oo.T) / 2
    return FimBundle(F_oo, F_oa, F_aa, scene.jacobian)


def fim_omega(blocks: FimBundle) -> np.ndarray:
    """Schur complement removing the nuisance alpha."""
    if not blocks.F_alpha_alpha > 0:
        raise SingularNuisanceError("F_alpha_alpha is zero")
    b = np.asarray(blocks.F_omega_alpha).reshape(-1, 1)
    return blocks.F_omega_omega - (b @ b.T) / blocks.F_alpha_alpha


def crb_trace(F_omega: np.ndarray, J: np.ndarray, warn: bool = True) -> tuple[np.ndarray, float]:
    """C = (J^T F_Omega J)^-1 and tr C.

    Near-singular information falls back to an eigenvalue-floored
    pseudo-inverse and emits a warning; exact singularity is an error.
    """
    Fp = J.T @ F_omega @ J
    Fp = (Fp + Fp.T) / 2
    lam, Q = np.linalg.eigh(Fp)
    top = lam[-1]
    if not top > 0 or lam[0] <= len(lam) * np.finfo(float).eps * top:
        raise UnobservableGeometryError("position Fisher information is singular")
    if lam[0] < PINV_FLOOR * top:
        if warn:
            warnings.warn("near-singular position FIM, eigenvalues floored before inversion")
        C = (Q / np.maximum(lam, PINV_FLOOR * top)) @ Q.T
    else:
        C = np.linalg.inv(Fp)
    C = (C + C.T) / 2
    return C, float(np.trace(C))


def evaluate_crb(scene, sol, alpha: float | None = None, sigma2: float | None = None,
                 warn: bool = True) -> FimBundle:
    b = fim_blocks(scene, sol, alpha, sigma2)
    return _reduce(b.F_omega_omega, b.F_omega_alpha, b.F_alpha_alpha, b.J, warn)


def rcrb_m(scene, sol, **kw) -> float:
    return evaluate_crb(scene, sol, **kw).rcrb_m


def _mean_from_params(xi, positions_km, arr, beta, x):
    """u(Xi) assembled densely from angles; independent of the blockwise fast path."""
    K = len(positions_km)
    th, ph, alpha = xi[:K], xi[K:2 * K], xi[2 * K]
    a = steering_vector(th, ph, arr).reshape(-1)
    A = np.outer(a, a.conj())
    B = np.kron(np.asarray(beta).T, np.ones((arr.n, arr.n)))
    return alpha * (A * B) @ x


def fim_fd_oracle(scene, sol, alpha: float | None = None, sigma2: float | None = None,
                  step: float = 1e-6) -> np.ndarray:
    """F_Xi from central differences of the mean, averaged over a symbol basis.

    E[s s^H] = I and E[s] = 0 make the symbol average equal the sum of the
    contributions of each beam column and of r taken one at a time.
    """
    alpha = scene.alpha if alpha is None else alpha
    sigma2 = scene.noise_power_w if sigma2 is None else sigma2
    ang = scene.angles
    xi0 = np.concatenate([ang.elevations, ang.azimuths, [alpha]])
    n = len(xi0)
    F = np.zeros((n, n))
    for x in sol.X.T:
        grads = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            up = _mean_from_params(xi0 + e, scene.positions_km, scene.arr, scene.gains.beta, x)
            dn = _mean_from_params(xi0 - e, scene.positions_km, scene.arr, scene.gains.beta, x)
            grads.append((up - dn) / (2 * step))
        Gm = np.array(grads)
        F += (2 / sigma2) * np.real(Gm.conj() @ Gm.T)
    return F


def fim_monte_carlo(scene, sol, draws: int, rng: np.random.Generator, alpha=None, sigma2=None) -> np.ndarray:
    """Definition-level F_Xi averaged over random unit-modulus symbol draws."""
    from .signal_model import SymbolBlock

    alpha = scene.alpha if alpha is None else alpha
    sigma2 = scene.noise_power_w if sigma2 is None else sigma2
    At, D = sensing_operators(scene)
    ops = np.concatenate([alpha * D, At[None]], axis=0)  # du/dXi_i = ops_i x
    S = np.stack([SymbolBlock.draw(sol.M, rng).s for _ in range(draws)])
    X = S @ sol.V.T + sol.r_tilde  # (draws, NK)
    G = np.einsum("ipq,dq->dip", ops, X)
    return (2 / sigma2) * np.real(np.einsum("dip,djp->ij", G.conj(), G)) / draws
