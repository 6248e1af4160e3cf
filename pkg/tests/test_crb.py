import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_solution, small_config
from leoisac.crb import evaluate_crb, fim_blocks, fim_fd_oracle, fim_monte_carlo, fim_omega
from leoisac.errors import SingularNuisanceError, UnobservableGeometryError
from leoisac.scene import build_scene
from leoisac.signal_model import BeamformingSolution


def test_fim_matches_finite_difference_oracle(tiny_scene, rng):
    sol = random_solution(rng, tiny_scene.M, tiny_scene.NK)
    F = fim_blocks(tiny_scene, sol).full
    np.testing.assert_allclose(F, fim_fd_oracle(tiny_scene, sol), rtol=1e-4, atol=1e-4 * np.abs(F).max())


def test_fim_matches_monte_carlo_average(tiny_scene, rng):
    sol = random_solution(rng, tiny_scene.M, tiny_scene.NK)
    F = fim_blocks(tiny_scene, sol).full
    mc = fim_monte_carlo(tiny_scene, sol, 20000, rng)
    np.testing.assert_allclose(mc, F, atol=0.05 * np.abs(F).max())


def test_fim_is_symmetric_psd(desk_scene, rng):
    F = fim_blocks(desk_scene, random_solution(rng, desk_scene.M, desk_scene.NK)).full
    np.testing.assert_allclose(F, F.T, rtol=1e-12)
    assert np.linalg.eigvalsh(F).min() >= -1e-9 * np.abs(F).max()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 10.0))
def test_crb_scales_inversely_with_power(seed, c):
    scene = build_scene(small_config(), seed=seed % 7)
    sol = random_solution(np.random.default_rng(seed), scene.M, scene.NK)
    a = evaluate_crb(scene, sol, warn=False).crb_trace
    b = evaluate_crb(scene, sol.scaled(np.sqrt(c)), warn=False).crb_trace
    assert b == pytest.approx(a / c, rel=1e-9)


def test_crb_scales_with_alpha_and_noise(tiny_scene, rng):
    sol = random_solution(rng, tiny_scene.M, tiny_scene.NK)
    base = evaluate_crb(tiny_scene, sol, alpha=1.0, sigma2=1.0).crb_trace
    assert evaluate_crb(tiny_scene, sol, alpha=3.0, sigma2=1.0).crb_trace == pytest.approx(base / 9, rel=1e-9)
    assert evaluate_crb(tiny_scene, sol, alpha=1.0, sigma2=4.0).crb_trace == pytest.approx(base * 4, rel=1e-9)


def test_nuisance_schur_complement_matches_block_inverse(tiny_scene, rng):
    b = fim_blocks(tiny_scene, random_solution(rng, tiny_scene.M, tiny_scene.NK))
    n = len(b.F_omega_alpha)
    inv_full = np.linalg.inv(b.full)[:n, :n]
    np.testing.assert_allclose(np.linalg.inv(fim_omega(b)), inv_full, rtol=1e-6)


def test_rcrb_is_sqrt_trace_in_metres(tiny_scene, rng):
    r = evaluate_crb(tiny_scene, random_solution(rng, tiny_scene.M, tiny_scene.NK))
    assert r.rcrb_m == pytest.approx(np.sqrt(np.trace(r.crb_matrix)) * 1e3)
    assert np.all(np.diag(r.crb_matrix) > 0)


def test_zero_waveform_has_no_nuisance_information(tiny_scene):
    with pytest.raises(SingularNuisanceError):
        evaluate_crb(tiny_scene, BeamformingSolution.zeros(tiny_scene.M, tiny_scene.NK))


def test_single_satellite_is_unobservable(rng):
    scene = build_scene(small_config(K=1, M=1), seed=0)
    with pytest.raises(UnobservableGeometryError):
        evaluate_crb(scene, random_solution(rng, 1, scene.NK))
