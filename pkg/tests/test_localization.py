import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_solution
from leoisac.errors import ConfigurationError, DegenerateSignalError, ParameterError, ResourceError
from leoisac.localization import (PsoConfig, alpha_mle, fitness, grid_axes, grid_search_locate, pso_locate,
                                  rmse)
from leoisac.signal_model import BeamformingSolution, SymbolBlock, mean_vector, synthesize_received


def _setup(scene, seed, alpha=None):
    rng = np.random.default_rng(seed)
    sol = random_solution(rng, scene.M, scene.NK)
    s = SymbolBlock.draw(sol.M, rng).s
    alpha = scene.alpha if alpha is None else alpha
    return rng, sol, s, alpha


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-3, 3), st.floats(-3, 3))
def test_concentrated_residual_identity(tiny_scene, seed, dx, dy):
    """min over alpha of ||y - alpha u(p)||^2 equals ||y||^2 - F(p)."""
    rng, sol, s, alpha = _setup(tiny_scene, seed)
    y = synthesize_received(tiny_scene, sol, s, alpha, rng).y
    p = tiny_scene.target.position_ecef_km + np.array([dx, dy, 0.0])
    u = mean_vector(tiny_scene.replace(target=type(tiny_scene.target)(p, 1.0)), sol, s, 1.0)
    a_ls = np.vdot(u, y) / np.vdot(u, u)  # independent least-squares fit
    resid = np.linalg.norm(y - a_ls * u) ** 2
    F = fitness(p, y, tiny_scene, sol, s)
    # compared at the scale of ||y||^2: ||y||^2 - F cancels, leaving eps*||y||^2/resid relative error
    y2 = np.linalg.norm(y) ** 2
    assert resid + F == pytest.approx(y2, rel=1e-10)
    assert alpha_mle(p, y, tiny_scene, sol, s) == pytest.approx(a_ls, rel=1e-10)


def test_alpha_hat_noiseless_is_exact(tiny_scene):
    _, sol, s, _ = _setup(tiny_scene, 3)
    sc = tiny_scene.replace(target=type(tiny_scene.target)(tiny_scene.target.position_ecef_km, 1.0))
    y = synthesize_received(sc, sol, s, 1.0, None, noiseless=True)
    a = alpha_mle(sc.target.position_ecef_km, y, sc, sol, s)
    assert abs(a - 1.0) <= 1e-9


def test_fitness_batch_matches_scalar(tiny_scene):
    rng, sol, s, alpha = _setup(tiny_scene, 4)
    y = synthesize_received(tiny_scene, sol, s, alpha, rng)
    P = tiny_scene.target.position_ecef_km + rng.uniform(-5, 5, size=(7, 3))
    batch = fitness(P, y, tiny_scene, sol, s)
    np.testing.assert_allclose(batch, [fitness(p, y, tiny_scene, sol, s) for p in P], rtol=1e-13)


def test_fitness_rejects_zero_probe(tiny_scene):
    sol = BeamformingSolution.zeros(tiny_scene.M, tiny_scene.NK)
    with pytest.raises(DegenerateSignalError):
        fitness(tiny_scene.target.position_ecef_km, np.ones(tiny_scene.NK), tiny_scene, sol, np.ones(2))


def test_inertia_schedule():
    c = PsoConfig()
    assert c.inertia(0) == 0.8
    assert c.inertia(40) == pytest.approx(0.4)
    assert c.inertia(20) == pytest.approx(0.6)


@pytest.mark.parametrize("kw", [dict(num_particles=0), dict(max_iters=-1), dict(w_min=0.9), dict(c1=-1)])
def test_pso_config_validation(kw):
    with pytest.raises(ConfigurationError):
        PsoConfig(**kw)


def test_pso_noiseless_within_a_metre(table_scene):
    rng, sol, s, alpha = _setup(table_scene, 11)
    y = synthesize_received(table_scene, sol, s, alpha, None, noiseless=True)
    c = table_scene.target.position_ecef_km
    res = pso_locate(y, table_scene, sol, s, PsoConfig(), rng, box=(c - 5, c + 5))
    assert np.linalg.norm(res.p_hat - c) * 1e3 <= 1.0
    assert res.fitness_trace == sorted(res.fitness_trace)  # global best never decreases
    assert res.evaluations == 50 * 41


def test_pso_is_reproducible(desk_scene):
    _, sol, s, alpha = _setup(desk_scene, 2)
    y = synthesize_received(desk_scene, sol, s, alpha, np.random.default_rng(0))
    box = (desk_scene.box_center_km - 10, desk_scene.box_center_km + 10)
    a = pso_locate(y, desk_scene, sol, s, PsoConfig(), np.random.default_rng(9), box=box)
    b = pso_locate(y, desk_scene, sol, s, PsoConfig(), np.random.default_rng(9), box=box)
    np.testing.assert_array_equal(a.p_hat, b.p_hat)


def test_pso_stays_in_box(desk_scene):
    rng, sol, s, alpha = _setup(desk_scene, 5)
    y = synthesize_received(desk_scene, sol, s, alpha, rng)
    c = desk_scene.target.position_ecef_km + 30.0  # box that excludes the truth
    res = pso_locate(y, desk_scene, sol, s, PsoConfig(max_iters=10), rng, box=(c - 1, c + 1))
    assert np.all(res.p_hat >= c - 1) and np.all(res.p_hat <= c + 1)


def test_grid_single_point_box(tiny_scene):
    rng, sol, s, alpha = _setup(tiny_scene, 6)
    y = synthesize_received(tiny_scene, sol, s, alpha, rng)
    p = tiny_scene.target.position_ecef_km
    res = grid_search_locate(y, tiny_scene, sol, s, (p, p), 0.1)
    np.testing.assert_array_equal(res.p_hat, p)


def test_grid_noiseless_bound(tiny_scene):
    _, sol, s, alpha = _setup(tiny_scene, 8)
    y = synthesize_received(tiny_scene, sol, s, alpha, None, noiseless=True)
    p = tiny_scene.target.position_ecef_km
    res = grid_search_locate(y, tiny_scene, sol, s, (p - 1, p + 1), 0.25)
    assert res.fitness_at_p_hat <= fitness(p, y, tiny_scene, sol, s) * (1 + 1e-12)


def test_grid_limits():
    assert [len(a) for a in grid_axes([0, 0, 0], [1, 2, 0], 0.5)] == [3, 5, 1]
    with pytest.raises(ConfigurationError):
        grid_axes([0, 0, 0], [1, 1, 1], 0)


def test_grid_resource_error(tiny_scene):
    _, sol, s, _ = _setup(tiny_scene, 1)
    p = tiny_scene.target.position_ecef_km
    with pytest.raises(ResourceError):
        grid_search_locate(np.ones(tiny_scene.NK), tiny_scene, sol, s, (p - 100, p + 100), 0.1)


def test_rmse_helper():
    assert rmse([[0, 0, 0], [3, 4, 0]], [[0, 0, 0], [0, 0, 0]]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(ParameterError):
        rmse([], [])
