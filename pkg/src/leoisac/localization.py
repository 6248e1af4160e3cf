"""Direct position determination: matched-filter fitness, PSO and grid search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateSignalError, ParameterError, ResourceError
from .signal_model import probe_vector, unit_mean

_TINY = 1e-300


def _observation(y):
    return np.asarray(getattr(y, "y", y), dtype=complex).reshape(-1)


def _fitness_parts(p, y, scene, x):
    """Numerator x^H (A o B)^H y and denominator ||(A o B) x||^2, batched over p."""
    u, c = unit_mean(scene.positions_km, np.asarray(p, dtype=float), scene.arr, scene.gains.beta, x)
    num = np.einsum("...kn,kn->...", u.conj(), y.reshape(scene.K, scene.N))
    den = np.sum(np.abs(c) ** 2, axis=-1)
    return num, den


def fitness(p, y, scene, sol, s) -> np.ndarray | float:
    """Concentrated log-likelihood |x^H (A o B)^H y|^2 / ||(A o B) x||^2.

    ``p`` may be a single position (3,) or a batch (..., 3).
    """
    x = probe_vector(sol, s)
    if not np.any(x):
        raise DegenerateSignalError("probing signal Vs + r is zero")
    num, den = _fitness_parts(p, _observation(y), scene, x)
    if np.any(den <= _TINY):
        raise DegenerateSignalError("zero model energy at candidate position")
    f = np.abs(num) ** 2 / den
    return float(f) if np.ndim(f) == 0 else f


def alpha_mle(p, y, scene, sol, s) -> complex:
    """Closed-form reflection coefficient given ``p``."""
    x = probe_vector(sol, s)
    num, den = _fitness_parts(p, _observation(y), scene, x)
    if den <= _TINY:
        raise DegenerateSignalError("zero model energy at candidate position")
    return complex(num / den)


@dataclass(frozen=True)
class PsoConfig:
    num_particles: int = 50
    max_iters: int = 40
    c1: float = 1.5
    c2: float = 1.5
    w_max: float = 0.8
    w_min: float = 0.4
    search_box: tuple = None  # (lo(3,), hi(3,)) in ECEF km
    velocity_clamp: float = 0.2
    redraw_r: bool = True

    def __post_init__(self):
        if self.num_particles < 1:
            raise ConfigurationError("num_particles must be >= 1")
        if self.max_iters < 0:
            raise ConfigurationError("max_iters must be >= 0")
        if not 0 <= self.w_min <= self.w_max:
            raise ConfigurationError("need 0 <= w_min <= w_max")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigurationError("learning factors must be >= 0")

    def box(self, center=None, side_km: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
        if self.search_box is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.search_box)
        elif center is not None:
            c = np.asarray(center, dtype=float)
            lo, hi = c - side_km / 2, c + side_km / 2
        else:
            raise ConfigurationError("no search box given")
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise ConfigurationError("search box must have lo <= hi on every axis")
        return lo, hi

    def inertia(self, n: int) -> float:
        if self.max_iters == 0:
            return self.w_max
        return self.w_max - (self.w_max - self.w_min) * n / self.max_iters


def default_box(scene, side_km: float = 20.0) -> tuple[np.ndarray, np.ndarray]:
    c = np.asarray(scene.box_center_km, dtype=float)
    return c - side_km / 2, c + side_km / 2


@dataclass
class PsoState:
    positions: np.ndarray
    velocities: np.ndarray
    personal_best: np.ndarray
    personal_best_fitness: np.ndarray
    global_best: np.ndarray
    global_best_fitness: float
    iteration: int = 0
    evaluations: int = 0


@dataclass
class LocalizationResult:
    p_hat: np.ndarray
    fitness_at_p_hat: float
    alpha_hat: complex
    iterations_used: int
    fitness_trace: list = field(default_factory=list)
    evaluations: int = 0


def pso_locate(y, scene, sol, s, cfg: PsoConfig, rng: np.random.Generator,
               box: tuple | None = None) -> LocalizationResult:
    """Particle swarm maximisation of the fitness with a linearly decreasing inertia.

    Each round ``n = 0..N_p`` evaluates every particle, refreshes personal and
    global bests, then (for ``n < N_p``) moves the swarm with inertia
    ``w(n)``. Velocities are clamped per axis to ``velocity_clamp`` times the
    box extent; particles leaving the box are clamped and their velocity on
    that axis is zeroed.
    """
    lo, hi = box if box is not None else cfg.box(scene.box_center_km)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if np.any(hi < lo):
        raise ConfigurationError("empty search box")
    ext = hi - lo
    vmax = cfg.velocity_clamp * ext
    x = probe_vector(sol, s)
    if not np.any(x):
        raise DegenerateSignalError("probing signal Vs + r is zero")
    yv = _observation(y)

    def evaluate(P):
        num, den = _fitness_parts(P, yv, scene, x)
        return np.abs(num) ** 2 / np.maximum(den, _TINY)

    n_p = cfg.num_particles
    pos = lo + rng.uniform(size=(n_p, 3)) * ext
    vel = np.zeros((n_p, 3))
    st = PsoState(pos, vel, pos.copy(), np.full(n_p, -np.inf), pos[0].copy(), -np.inf)
    if not cfg.redraw_r:
        r1_fixed, r2_fixed = rng.uniform(size=(n_p, 3)), rng.uniform(size=(n_p, 3))
    trace = []
    for n in range(cfg.max_iters + 1):
        f = evaluate(st.positions)
        st.evaluations += n_p
        better = f > st.personal_best_fitness
        st.personal_best[better] = st.positions[better]
        st.personal_best_fitness[better] = f[better]
        i_best = int(np.argmax(st.personal_best_fitness))
        if st.personal_best_fitness[i_best] > st.global_best_fitness:
            st.global_best = st.personal_best[i_best].copy()
            st.global_best_fitness = float(st.personal_best_fitness[i_best])
        trace.append(st.global_best_fitness)
        st.iteration = n
        if n == cfg.max_iters:
            break
        if cfg.redraw_r:
            r1, r2 = rng.uniform(size=(n_p, 3)), rng.uniform(size=(n_p, 3))
        else:
            r1, r2 = r1_fixed, r2_fixed
        w = cfg.inertia(n)
        v = (w * st.velocities + cfg.c1 * r1 * (st.personal_best - st.positions)
             + cfg.c2 * r2 * (st.global_best - st.positions))
        v = np.clip(v, -vmax, vmax)
        newp = st.positions + v
        out = (newp < lo) | (newp > hi)
        st.positions = np.clip(newp, lo, hi)
        v[out] = 0.0
        st.velocities = v
    p_hat = st.global_best
    return LocalizationResult(p_hat, st.global_best_fitness, alpha_mle(p_hat, yv, scene, sol, s),
                              cfg.max_iters, trace, st.evaluations)


MAX_GRID_POINTS = 10 ** 8


def grid_axes(lo, hi, resolution_km: float) -> list[np.ndarray]:
    if resolution_km <= 0:
        raise ConfigurationError("grid resolution must be positive")
    axes = []
    for a, b in zip(lo, hi):
        n = int(math.floor((b - a) / resolution_km + 1e-9)) + 1
        axes.append(a + resolution_km * np.arange(n))
    return axes


def grid_search_locate(y, scene, sol, s, box, resolution_km: float,
                       chunk: int = 200_000) -> LocalizationResult:
    """Exhaustive argmax of the fitness over a lattice anchored at ``box[0]``."""
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if np.any(hi < lo):
        raise ConfigurationError("empty search box")
    ax = grid_axes(lo, hi, resolution_km)
    shape = tuple(len(a) for a in ax)
    total = int(np.prod(shape))
    if total > MAX_GRID_POINTS:
        raise ResourceError(f"lattice has {total} points, limit is {MAX_GRID_POINTS}")
    x = probe_vector(sol, s)
    yv = _observation(y)
    best_f, best_i = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        ijk = np.unravel_index(idx, shape)
        P = np.column_stack([ax[d][ijk[d]] for d in range(3)])
        num, den = _fitness_parts(P, yv, scene, x)
        f = np.abs(num) ** 2 / np.maximum(den, _TINY)
        j = int(np.argmax(f))
        if f[j] > best_f:
            best_f, best_i = float(f[j]), int(idx[j])
    ijk = np.unravel_index(best_i, shape)
    p_hat = np.array([ax[d][ijk[d]] for d in range(3)])
    return LocalizationResult(p_hat, best_f, alpha_mle(p_hat, yv, scene, sol, s), 0, [best_f], total)


def rmse(estimates, truths) -> float:
    e = np.asarray(estimates, dtype=float).reshape(-1, 3)
    t = np.asarray(truths, dtype=float).reshape(-1, 3)
    if len(e) == 0 or len(e) != len(t):
        raise ParameterError("need equal, non-empty estimate and truth lists")
    return float(np.sqrt(np.mean(np.sum((e - t) ** 2, axis=1))))
