import numpy as np
import pytest

from leoisac.channel import ArrayGeometry
from leoisac.scene import SceneConfig, build_scene
from leoisac.signal_model import BeamformingSolution


def small_config(K=2, nx=2, nz=2, M=2, **kw) -> SceneConfig:
    return SceneConfig(num_sats=K, num_ues=M, array=ArrayGeometry(nx, nz), **kw)


def random_solution(rng, M, NK, scale=0.3) -> BeamformingSolution:
    c = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) * scale
    return BeamformingSolution(c(M, NK), c(NK))


@pytest.fixture(scope="session")
def desk_scene():
    """K=3 satellites with 2x2 arrays and three UEs."""
    return build_scene(small_config(K=3, M=3), seed=0)


@pytest.fixture(scope="session")
def tiny_scene():
    """K=2, N=4, M=2."""
    return build_scene(small_config(), seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def table_scene():
    """Full default geometry: K=5, 4x4 arrays, ten UEs."""
    return build_scene(SceneConfig(), seed=0)


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    """Note one criterion's outcome; printed again in the terminal summary."""
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
