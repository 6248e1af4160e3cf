"""Dual-function transmit model, UE rates and the aggregated sensing observation."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Any

import numpy as np

from .channel import steering_vector
from .errors import ConfigurationError, ParameterError
from .geometry import target_angles_batch

OBS_MAGIC = b"LISY"
OBS_VERSION = 1


@dataclass(frozen=True)
class BeamformingSolution:
    """Stacked beams ``w_tilde`` (M, NK) and sensing waveform ``r_tilde`` (NK,)."""
    w_tilde: np.ndarray
    r_tilde: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w_tilde, dtype=complex))
        r = np.asarray(self.r_tilde, dtype=complex).reshape(-1)
        if w.size == 0:
            w = np.zeros((0, r.size), dtype=complex)
        if w.shape[1] != r.size:
            raise ConfigurationError(f"beam length {w.shape[1]} != waveform length {r.size}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(r))):
            raise ConfigurationError("beamforming solution has non-finite entries")
        object.__setattr__(self, "w_tilde", w)
        object.__setattr__(self, "r_tilde", r)

    @property
    def M(self) -> int:
        return self.w_tilde.shape[0]

    @property
    def NK(self) -> int:
        return self.r_tilde.size

    @property
    def V(self) -> np.ndarray:
        """[V_1; ...; V_K], i.e. the beams as columns (NK, M)."""
        return self.w_tilde.T

    @property
    def W(self) -> list[np.ndarray]:
        return [np.outer(w, w.conj()) for w in self.w_tilde]

    @property
    def R(self) -> np.ndarray:
        return np.outer(self.r_tilde, self.r_tilde.conj())

    @property
    def X(self) -> np.ndarray:
        """Square root of R + sum_m W_m as columns [w_1, ..., w_M, r]."""
        return np.column_stack([self.V, self.r_tilde])

    def scaled(self, c: float) -> "BeamformingSolution":
        return BeamformingSolution(self.w_tilde * c, self.r_tilde * c)

    @classmethod
    def zeros(cls, m: int, nk: int) -> "BeamformingSolution":
        return cls(np.zeros((m, nk), dtype=complex), np.zeros(nk, dtype=complex))

    def to_json(self) -> dict[str, Any]:
        return {
            "w_tilde": [[[float(z.real), float(z.imag)] for z in w] for w in self.w_tilde],
            "r_tilde": [[float(z.real), float(z.imag)] for z in self.r_tilde],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BeamformingSolution":
        r = np.array([complex(a, b) for a, b in data["r_tilde"]])
        w = np.array([[complex(a, b) for a, b in row] for row in data["w_tilde"]], dtype=complex)
        return cls(w.reshape(-1, r.size), r)


@dataclass(frozen=True)
class SymbolBlock:
    s: np.ndarray
    constellation: str = "qpsk"

    @classmethod
    def draw(cls, m: int, rng: np.random.Generator) -> "SymbolBlock":
        """Unit-modulus QPSK symbols."""
        k = rng.integers(0, 4, size=m)
        return cls(np.exp(1j * (np.pi / 4 + np.pi / 2 * k)))


@dataclass(frozen=True)
class SensingObservation:
    y: np.ndarray
    noise_power: float
    scene: Any = None


def selector(k: int, K: int, N: int) -> np.ndarray:
    """Lambda_k = gamma_k (x) I_N, shape (N, NK)."""
    g = np.zeros((1, K))
    g[0, k] = 1.0
    return np.kron(g, np.eye(N))


def transmit_power(sol: BeamformingSolution, k: int, n: int) -> float:
    """Power of satellite ``k`` (array size ``n``): sum_m |w_km|^2 + |r_k|^2."""
    K = sol.NK // n
    if not 0 <= k < K:
        raise ParameterError(f"satellite index {k} out of range")
    blk = slice(k * n, (k + 1) * n)
    return float(np.sum(np.abs(sol.w_tilde[:, blk]) ** 2) + np.sum(np.abs(sol.r_tilde[blk]) ** 2))


def transmit_power_lifted(W: list[np.ndarray], R: np.ndarray, k: int, n: int) -> float:
    """tr(sum_m Lambda_k W_m Lambda_k^T + Lambda_k R Lambda_k^T)."""
    lam = selector(k, R.shape[0] // n, n)
    S = R + sum(W, np.zeros_like(R))
    return float(np.real(np.trace(lam @ S @ lam.T)))


def all_powers(sol: BeamformingSolution, n: int) -> np.ndarray:
    K = sol.NK // n
    return np.array([transmit_power(sol, k, n) for k in range(K)])


def ue_rate(sol: BeamformingSolution, h_tilde: np.ndarray, i: int, sigma2: float) -> float:
    """Achievable rate of UE ``i`` in bit/s/Hz."""
    if not sigma2 > 0:
        raise ParameterError("noise power must be positive")
    h = h_tilde[i]
    g = np.abs(sol.w_tilde.conj() @ h) ** 2
    interf = g.sum() - g[i] + abs(np.vdot(sol.r_tilde, h)) ** 2
    return math.log2(1.0 + g[i] / (interf + sigma2))


def ue_rate_lifted(W: list[np.ndarray], R: np.ndarray, h_tilde: np.ndarray, i: int, sigma2: float) -> float:
    """Same rate through tr(W_m H_i) with H_i = h_i h_i^H."""
    if not sigma2 > 0:
        raise ParameterError("noise power must be positive")
    H = np.outer(h_tilde[i], h_tilde[i].conj())
    t = [float(np.real(np.trace(Wm @ H))) for Wm in W]
    interf = sum(t) - t[i] + float(np.real(np.trace(R @ H)))
    return math.log2(1.0 + t[i] / (interf + sigma2))


def all_rates(sol: BeamformingSolution, scene) -> np.ndarray:
    return np.array([ue_rate(sol, scene.h_tilde, i, scene.ue_noise_w[i]) for i in range(scene.M)])


def probe_vector(sol: BeamformingSolution, s) -> np.ndarray:
    """Vs + r_tilde."""
    s = np.asarray(getattr(s, "s", s), dtype=complex).reshape(-1)
    if s.size != sol.M:
        raise ParameterError(f"expected {sol.M} symbols, got {s.size}")
    return sol.V @ s + sol.r_tilde


def unit_mean(positions_km, p, arr, beta, x) -> np.ndarray:
    """(A(p) o B) x evaluated blockwise, broadcasting over leading axes of ``p``.

    Block ``u`` equals ``a_u * sum_k beta[k, u] a_k^H x_k``. Returns
    ``(..., K, N)`` plus the per-receiver coefficients ``(..., K)``.
    """
    th, ph = target_angles_batch(positions_km, p)
    a = steering_vector(th, ph, arr)
    K, N = a.shape[-2], a.shape[-1]
    t = np.einsum("...kn,kn->...k", a.conj(), np.asarray(x).reshape(K, N))
    c = t @ np.asarray(beta)
    return a * c[..., None], c


def mean_vector(scene, sol: BeamformingSolution, s, alpha: float) -> np.ndarray:
    """u = alpha (A o B)(Vs + r)."""
    x = probe_vector(sol, s)
    u, _ = unit_mean(scene.positions_km, scene.target.position_ecef_km, scene.arr, scene.gains.beta, x)
    return alpha * u.reshape(-1)


def synthesize_received(scene, sol: BeamformingSolution, s, alpha: float, rng: np.random.Generator | None,
                        noiseless: bool = False) -> SensingObservation:
    u = mean_vector(scene, sol, s, alpha)
    if noiseless:
        return SensingObservation(u, 0.0, scene)
    sig = math.sqrt(scene.noise_power_w / 2)
    n = sig * (rng.standard_normal(u.size) + 1j * rng.standard_normal(u.size))
    return SensingObservation(u + n, scene.noise_power_w, scene)


def dump_observation(obs: SensingObservation) -> bytes:
    """16-byte header (magic, uint32 version, uint64 NK) then interleaved float64 re/im, little-endian."""
    y = np.asarray(obs.y, dtype=np.complex128)
    head = OBS_MAGIC + struct.pack("<IQ", OBS_VERSION, y.size)
    return head + y.astype("<c16").tobytes()


def load_observation(blob: bytes) -> np.ndarray:
    if len(blob) < 16 or blob[:4] != OBS_MAGIC:
        raise ParameterError("not an observation dump")
    version, nk = struct.unpack("<IQ", blob[4:16])
    if version != OBS_VERSION:
        raise ParameterError(f"unsupported dump version {version}")
    body = blob[16:]
    if len(body) != 16 * nk:
        raise ParameterError("truncated observation dump")
    return np.frombuffer(body, dtype="<c16").astype(complex)
