import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leoisac.errors import GeometryError, GroupError, SingularJacobianError
from leoisac.geometry import (EARTH_RADIUS_KM, ConstellationConfig, angle_jacobian, build_walker_delta,
                              constellation_csv, place_target, place_ues, sample_cap, select_serving_group,
                              target_angles)


@pytest.fixture(scope="module")
def sats():
    return build_walker_delta(ConstellationConfig())


def test_walker_count_and_radius(sats):
    assert len(sats) == 72 * 22
    r = np.linalg.norm([s.position_ecef_km for s in sats], axis=1)
    np.testing.assert_allclose(r, EARTH_RADIUS_KM + 550.0, rtol=1e-12)


def test_walker_inclination(sats):
    # max |z| over a plane equals r sin(i)
    z = np.array([s.position_ecef_km[2] for s in sats if s.plane == 3])
    r = EARTH_RADIUS_KM + 550.0
    assert z.max() <= r * math.sin(math.radians(53)) + 1e-9
    assert z.max() > 0.98 * r * math.sin(math.radians(53))


def test_walker_in_plane_spacing(sats):
    a, b = sats[0].position_ecef_km, sats[1].position_ecef_km
    r = np.linalg.norm(a)
    ang = math.acos(np.dot(a, b) / r ** 2)
    assert ang == pytest.approx(2 * math.pi / 22, rel=1e-12)


def test_constellation_csv_header_and_rows(sats):
    text = constellation_csv(sats[:3])
    lines = text.split("\r\n")
    assert lines[0] == "plane,slot,x_km,y_km,z_km"
    assert lines[1].startswith("0,0,6921.0,")
    assert len([ln for ln in lines if ln]) == 4


@pytest.mark.parametrize("ctype,k", [("I", 3), ("II", 5), ("III", 7)])
def test_group_types(sats, ctype, k):
    g = select_serving_group(sats, (0, 0), ctype, k)
    planes = {m.plane for m in g.members}
    assert g.size == k
    if ctype == "I":
        assert planes == {0}
    else:
        assert planes == {71, 0, 1}


def test_group_first_neighbours_are_in_plane(sats):
    g = select_serving_group(sats, (0, 0), "II", 5)
    assert {m.index for m in g.members[1:3]} == {(0, 1), (0, 21)}


def test_group_errors(sats):
    with pytest.raises(GroupError):
        select_serving_group(sats, (0, 0), "IV", 3)
    with pytest.raises(GroupError):
        select_serving_group(sats, (99, 0), "I", 3)
    with pytest.raises(GroupError):
        select_serving_group(sats, (0, 0), "II", 40)


def test_angles_match_definitions():
    q = np.zeros(3)
    th, ph = target_angles(q, [1.0, 1.0, -math.sqrt(2)])
    # below the satellite: arctan(rho/dz) + pi
    assert th == pytest.approx(math.atan(math.sqrt(2) / -math.sqrt(2)) + math.pi)
    assert ph == pytest.approx(math.pi / 4)
    with pytest.raises(GeometryError):
        target_angles(q, q)


coords = st.floats(-3000, 3000, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coords, coords, coords), st.tuples(coords, coords, coords))
def test_jacobian_against_central_differences(q, d):
    q, d = np.array(q), np.array(d)
    if math.hypot(d[0], d[1]) < 50:
        return
    p = q + d
    J = angle_jacobian(q[None], p)
    h = 1e-4
    fd = np.zeros((2, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        a, b = target_angles(q, p + e), target_angles(q, p - e)
        diff = np.array(a) - np.array(b)
        diff[1] = (diff[1] + math.pi) % (2 * math.pi) - math.pi
        fd[:, j] = diff / (2 * h)
    # atol is the rounding floor of a central difference of an angle: ~eps*pi/h
    np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-11)
    assert J[1, 2] == 0.0


def test_jacobian_singular_when_overhead():
    with pytest.raises(SingularJacobianError):
        angle_jacobian(np.array([[0.0, 0.0, 7000.0]]), [0.0, 0.0, 6371.0])


def test_cap_sampling_stays_inside(rng):
    c = np.array([1.0, 2.0, 3.0])
    pts = sample_cap(c, 50.0, 2000, rng)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), EARTH_RADIUS_KM)
    arc = EARTH_RADIUS_KM * np.arccos(np.clip(pts @ c / np.linalg.norm(c) / EARTH_RADIUS_KM, -1, 1))
    assert arc.max() <= 50.0 + 1e-9
    # uniform on the cap: median arc is close to r / sqrt(2) for a small cap
    assert np.median(arc) == pytest.approx(50 / math.sqrt(2), rel=0.05)


def test_place_ues_and_target(sats, rng):
    g = select_serving_group(sats, (0, 0), "II", 3)
    ues = place_ues(g, 4, 50.0, rng)
    assert ues.shape == (4, 3)
    t = place_target(g, 5.0, rng, reflection_coeff=0.5)
    assert t.reflection_coeff == 0.5
