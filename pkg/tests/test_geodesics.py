import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kobalab import domains as dm
from kobalab import geodesics as geo
from kobalab import metric
from kobalab.domains import DomainError

from conftest import MODELS, square_hull

BIDISC = dm.Polydisc(2)
TWO_ATANH_09 = 2.94443897916644069374019051087


def _interior(dom, rng, scale=0.9):
    return dm.sample_interior(dom, 1, rng)[0] * scale


def test_bidisc_complex_geodesic_through_real_pair():
    cg = geo.complex_geodesic_through(BIDISC, [-0.9, 0], [0.9, 0])
    inv, iso = cg.check()
    assert inv < 1e-10 and iso < 1e-8
    t = math.tanh(TWO_ATANH_09)
    ends = cg.phi(np.array([0.0, t]))
    assert np.allclose(ends, [[-0.9, 0], [0.9, 0]], atol=1e-12)


def test_ball_complex_geodesic_through_center_is_linear():
    cg = geo.complex_geodesic_through(dm.Ball(2), [0, 0], [0.75, 0])
    zeta = np.array([0.1, -0.3j, 0.5 + 0.2j])
    assert np.allclose(cg.phi(zeta)[:, 1], 0, atol=1e-14)
    assert np.allclose(np.abs(cg.phi(zeta)[:, 0]), np.abs(zeta))


@pytest.mark.parametrize("dom", MODELS, ids=str)
def test_complex_geodesics_are_isometric_on_models(dom, rng):
    for _ in range(3):
        z, w = _interior(dom, rng), _interior(dom, rng)
        inv, iso = geo.complex_geodesic_through(dom, z, w).check()
        assert inv < 1e-10 and iso < 1e-8


def test_complex_geodesic_rejects_hull():
    with pytest.raises(NotImplementedError):
        geo.complex_geodesic_through(square_hull(2), [0, 0], [0.5, 0])


def test_bidisc_segment_length():
    path = geo.geodesic_segment(BIDISC, [-0.9, 0], [0.9, 0])
    ends = path.sample(np.array([0.0, 1.0]))
    assert metric.model_distance(BIDISC, ends[0], ends[1]) == pytest.approx(TWO_ATANH_09, abs=1e-12)
    assert geo.check_geodesic(path) <= 1e-8


def test_ball_segment_from_center_is_straight():
    path = geo.geodesic_segment(dm.Ball(2), [0, 0], [0.75, 0])
    pts = path.sample(np.linspace(0, 1, 9))
    assert np.allclose(pts[:, 1], 0) and np.allclose(pts[:, 0].imag, 0, atol=1e-14)
    assert metric.model_distance(dm.Ball(2), pts[0], pts[-1]) == pytest.approx(math.atanh(0.75))


def test_degenerate_segment_is_constant():
    path = geo.geodesic_segment(BIDISC, [0.2, 0.1], [0.2, 0.1])
    assert np.allclose(path.sample(np.linspace(0, 1, 5)), [0.2, 0.1])
    assert path.defect == 0 and geo.check_geodesic(path) == 0


@pytest.mark.parametrize("dom", MODELS, ids=str)
def test_model_segments_reproduce_distance(dom, rng):
    z, w = _interior(dom, rng), _interior(dom, rng)
    path = geo.geodesic_segment(dom, z, w)
    ends = path.sample(np.array([0.0, 1.0]))
    assert np.allclose(ends, [z, w], atol=1e-10)
    # parameter is affine in distance
    mid = path.sample(0.5)
    d = metric.model_distance(dom, z, w)
    assert metric.model_distance(dom, z, mid) == pytest.approx(d / 2, abs=1e-9)
    assert geo.check_geodesic(path, samples=24) <= 1e-8


def test_bidisc_example_points():
    path = geo.bidisc_example_segment(0.9)
    assert np.allclose(path.sample(np.array([0, 0.5, 1])), [[-0.9, 0], [0, 0.9], [0.9, 0]])
    p = path.sample(np.array([0.0, 0.25]))
    assert metric.model_distance(BIDISC, p[0], p[1]) == pytest.approx(math.atanh(0.45), abs=1e-12)
    assert geo.check_geodesic(path) <= 1e-9


def test_bidisc_example_rejects_bad_r():
    for r in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            geo.bidisc_example_segment(r)


@given(st.floats(0.01, 0.999), st.floats(0, 0.5))
def test_bidisc_example_distance_from_start(r, t):
    p = geo.bidisc_example_segment(r).sample(np.array([0.0, t]))
    assert metric.model_distance(BIDISC, p[0], p[1]) == pytest.approx(math.atanh(2 * r * t), abs=1e-10)


def test_euclidean_chord_is_not_geodesic():
    a, b = 0.9j, -0.9

    def curve(t):
        return (a + (b - a) * np.asarray(t, dtype=float))[..., None].astype(complex)

    chord = geo.GeodesicPath(dm.Polydisc(1), curve)
    assert geo.check_geodesic(chord) > 0.01


@given(st.floats(0.0, 1.0))
def test_check_geodesic_invariant_under_reparametrisation(power):
    path = geo.bidisc_example_segment(0.7)
    nodes = geo.chebyshev_nodes(20)
    a = geo.check_geodesic(path, nodes=nodes)
    b = geo.check_geodesic(path, nodes=nodes ** (1 + power))
    assert abs(a - b) <= 1e-9


@pytest.mark.parametrize("dom, p", [(dm.Polydisc(1), [1]), (dm.Ball(2), [1, 0]), (BIDISC, [1, 0])])
def test_radial_rays_are_tanh(dom, p):
    ray = geo.geodesic_ray(dom, np.zeros(dom.dim), p)
    t = np.array([0.0, 0.5, 2.0, 8.0])
    pts = ray.sample(t)
    assert np.allclose(pts[:, 0], np.tanh(t), atol=1e-14)
    assert np.allclose(pts[:, 1:], 0)


@pytest.mark.parametrize("dom", MODELS, ids=str)
def test_rays_have_unit_speed_and_land(dom, rng):
    z0 = _interior(dom, rng, 0.5)
    p = dm.sample_boundary(dom, 1, rng)[0]
    ray = geo.geodesic_ray(dom, z0, p)
    t = np.array([0.5, 1.5, 3.0])
    assert np.allclose(metric.model_distance(dom, z0, ray.sample(t)), t, atol=1e-9)
    assert np.linalg.norm(ray.sample(30.0) - p) < 1e-6
    assert geo.check_geodesic(ray, samples=16) <= 1e-8


def test_ray_preconditions():
    with pytest.raises(DomainError):
        geo.geodesic_ray(BIDISC, [0, 0], [0.5, 0])
    with pytest.raises(NotImplementedError):
        geo.geodesic_ray(square_hull(2), [0, 0], [1, 0])


def test_polydisc_ray_to_point_with_two_unimodular_coordinates():
    ray = geo.geodesic_ray(BIDISC, [0, 0.3], [1, -1j])
    assert np.allclose(ray.sample(40.0), [1, -1j], atol=1e-8)


def test_segment_csv_rows():
    header, rows = geo.bidisc_example_segment(0.5).csv_rows(np.linspace(0, 1, 5))
    assert header[-2:] == ["boundary_distance", "k_to_start"]
    assert rows[0][-1] == 0 and rows[2][-1] == pytest.approx(math.atanh(0.5))


def test_general_segment_reports_defect():
    path = geo.geodesic_segment(square_hull(2), [0, 0], [0.5, 0], budget=4000)
    ends = path.sample(np.array([0.0, 1.0]))
    assert np.allclose(ends, [[0, 0], [0.5, 0]], atol=1e-6)
    assert 0 <= path.defect < 1e-3


def test_equicontinuity_ball_is_lipschitz():
    table = geo.equicontinuity_probe(dm.Ball(2), [0, 0], rays=8)
    assert np.all(table.omega <= 2.5 * table.deltas + 1e-12)
    assert not table.flagged


def test_equicontinuity_bidisc_complex_family_is_flagged():
    targets = [[1, np.exp(1j * s)] for s in (0.0, 0.05, 0.1)]
    table = geo.equicontinuity_probe(BIDISC, [0, 0], targets=targets, family="complex")
    assert table.flagged


def test_equicontinuity_single_ray_is_its_own_modulus():
    table = geo.equicontinuity_probe(dm.Ball(2), [0, 0], targets=[[1, 0]])
    assert np.array_equal(table.omega, table.per_member[0])
