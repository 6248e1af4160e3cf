import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_solution
from leoisac.errors import ConfigurationError, ParameterError
from leoisac.signal_model import (BeamformingSolution, SymbolBlock, all_powers, dump_observation,
                                  load_observation, mean_vector, probe_vector, synthesize_received,
                                  transmit_power_lifted, ue_rate, ue_rate_lifted)


def test_symbols_unit_modulus(rng):
    s = SymbolBlock.draw(1000, rng).s
    np.testing.assert_allclose(np.abs(s), 1.0, rtol=1e-15)
    assert len(np.unique(np.round(np.angle(s), 9))) == 4


def test_solution_validation():
    with pytest.raises(ConfigurationError):
        BeamformingSolution(np.ones((2, 3)), np.ones(4))
    with pytest.raises(ConfigurationError):
        BeamformingSolution(np.ones((1, 2)), np.array([np.nan, 0]))


def test_solution_json_roundtrip(rng):
    sol = random_solution(rng, 3, 8)
    back = BeamformingSolution.from_json(sol.to_json())
    np.testing.assert_array_equal(back.w_tilde, sol.w_tilde)
    np.testing.assert_array_equal(back.r_tilde, sol.r_tilde)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_rate_direct_equals_lifted(seed):
    rng = np.random.default_rng(seed)
    sol = random_solution(rng, 3, 8)
    h = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    for i in range(3):
        assert ue_rate(sol, h, i, 0.1) == pytest.approx(ue_rate_lifted(sol.W, sol.R, h, i, 0.1), rel=1e-12)


def test_rate_single_user_no_interference():
    sol = BeamformingSolution(np.array([[1.0, 0.0]]), np.zeros(2))
    h = np.array([[2.0, 5.0]])
    assert ue_rate(sol, h, 0, 1.0) == pytest.approx(np.log2(5.0))
    with pytest.raises(ParameterError):
        ue_rate(sol, h, 0, 0.0)


def test_power_direct_equals_lifted(rng):
    sol = random_solution(rng, 2, 12)
    p = all_powers(sol, 4)
    lifted = [transmit_power_lifted(sol.W, sol.R, k, 4) for k in range(3)]
    np.testing.assert_allclose(p, lifted, rtol=1e-12)
    assert p.sum() == pytest.approx(np.sum(np.abs(sol.w_tilde) ** 2) + np.sum(np.abs(sol.r_tilde) ** 2))


def test_mean_vector_matches_dense_hadamard(tiny_scene, rng):
    sol = random_solution(rng, tiny_scene.M, tiny_scene.NK)
    s = SymbolBlock.draw(sol.M, rng).s
    A, B = tiny_scene.matrices
    dense = tiny_scene.alpha * (A * B) @ (sol.V @ s + sol.r_tilde)
    np.testing.assert_allclose(mean_vector(tiny_scene, sol, s, tiny_scene.alpha), dense, rtol=1e-12)


def test_probe_vector_shape_check(rng):
    sol = random_solution(rng, 2, 4)
    with pytest.raises(ParameterError):
        probe_vector(sol, np.ones(3))


def test_noise_statistics(tiny_scene, rng):
    sol = random_solution(rng, tiny_scene.M, tiny_scene.NK)
    s = SymbolBlock.draw(sol.M, rng).s
    u = synthesize_received(tiny_scene, sol, s, tiny_scene.alpha, None, noiseless=True).y
    res = np.concatenate([synthesize_received(tiny_scene, sol, s, tiny_scene.alpha, rng).y - u
                          for _ in range(3000)])
    assert np.mean(np.abs(res) ** 2) == pytest.approx(tiny_scene.noise_power_w, rel=0.03)
    assert abs(np.mean(res.real * res.imag)) < 0.05 * tiny_scene.noise_power_w


def test_observation_dump_layout_and_roundtrip(rng):
    from leoisac.signal_model import SensingObservation
    y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    blob = dump_observation(SensingObservation(y, 1.0))
    assert blob[:4] == b"LISY"
    assert struct.unpack("<IQ", blob[4:16]) == (1, 6)
    assert len(blob) == 16 + 6 * 16
    assert struct.unpack("<dd", blob[16:32]) == (y[0].real, y[0].imag)
    np.testing.assert_array_equal(load_observation(blob), y)


@pytest.mark.parametrize("blob", [b"XXXX" + bytes(12), b"LISY" + struct.pack("<IQ", 9, 0),
                                  b"LISY" + struct.pack("<IQ", 1, 2) + bytes(16)])
def test_observation_dump_rejects_bad_input(blob):
    with pytest.raises(ParameterError):
        load_observation(blob)
