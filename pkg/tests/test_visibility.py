import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kobalab import domains as dm
from kobalab import geodesics as geo
from kobalab import visibility as vis
from kobalab.domains import DomainError

BIDISC = dm.Polydisc(2)


def test_crossing_oracle_values():
    assert vis.example_crossing_value(0.9) == pytest.approx(math.atanh((1 - math.sqrt(0.19)) / 0.9))
    assert vis.example_crossing_value(0.9) == pytest.approx(0.7361097447916103, abs=1e-12)
    assert vis.example_crossing_value(0.9999) == pytest.approx(2.476, abs=1e-3)


@pytest.mark.parametrize("r", [0.3, 0.9, 0.99, 0.9999])
def test_closest_approach_matches_crossing_oracle(r):
    c, t = vis.closest_approach_argmin(geo.bidisc_example_segment(r), [0, 0])
    assert c == pytest.approx(vis.example_crossing_value(r), abs=1e-9)
    assert t == pytest.approx((1 - math.sqrt(1 - r * r)) / (2 * r * r), abs=1e-6)


def test_closest_approach_through_base_is_zero():
    seg = geo.geodesic_segment(BIDISC, [-0.5, 0], [0.5, 0])
    assert vis.closest_approach(seg, [0, 0]) < 1e-9


@given(st.floats(0.05, 0.99), st.floats(0.001, 0.009))
def test_crossing_value_increases(r, dr):
    assert vis.example_crossing_value(r + dr) > vis.example_crossing_value(r)


def test_closest_approach_rejects_exterior_base():
    with pytest.raises(DomainError):
        vis.closest_approach(geo.bidisc_example_segment(0.5), [1.2, 0])


def test_sequences_approach_their_targets():
    z = vis.radial_sequence(BIDISC, [1, 0.5], 10)
    assert np.allclose(z, (1 - 2 ** -10) * np.array([1, 0.5]))
    t = vis.tangential_sequence(BIDISC, [1, 0.5], 10)
    assert BIDISC.contains(t) and abs(t[0] - 1) == pytest.approx(2 ** -10)


def test_strong_probe_escapes_on_bidisc():
    v = vis.strong_visibility_probe(BIDISC, [-1, 0], [1, 0])
    assert v.status == vis.ESCAPING and v.approach_radius > 2.0


@pytest.mark.parametrize("dom, p, q", [(dm.Polydisc(1), [-1], [1]), (dm.Ball(2), [1, 0], [-1, 0])])
def test_strong_probe_finite_on_strictly_convex(dom, p, q):
    v = vis.strong_visibility_probe(dom, p, q, families=10)
    assert v.status == vis.FINITE and v.approach_radius < 1.0


def test_essential_probe_finite_on_bidisc():
    v = vis.essential_visibility_probe(BIDISC, [-1, 0], [1, 0], depth=12)
    assert v.status == vis.FINITE and v.approach_radius <= 1.0


def test_essential_probe_escapes_along_boundary_disc():
    v = vis.essential_visibility_probe(BIDISC, [1, 0], [1, 0.5], depth=14)
    assert v.status != vis.FINITE
    closest = [row[3] for row in v.evidence if row[0] == "radial/best"]
    assert closest[-1] > closest[0] + 2


def test_strong_implies_essential_and_complex_on_ball():
    dom, p, q = dm.Ball(2), [1, 0], [0, 1]
    s = vis.strong_visibility_probe(dom, p, q, families=8)
    e = vis.essential_visibility_probe(dom, p, q, depth=8)
    c = vis.complex_visibility_probe(dom, p, q, depth=8)
    assert s.status == e.status == c.status == vis.FINITE
    assert e.approach_radius <= s.approach_radius + 1e-12
    assert c.approach_radius <= s.approach_radius + 1e-6


def test_complex_probe_finite_on_bidisc():
    v = vis.complex_visibility_probe(BIDISC, [-1, 0], [1, 0], depth=12)
    assert v.status == vis.FINITE


def test_probe_preconditions():
    with pytest.raises(DomainError):
        vis.strong_visibility_probe(BIDISC, [1, 0], [1, 0])
    with pytest.raises(DomainError):
        vis.strong_visibility_probe(BIDISC, [0.5, 0], [1, 0])


def _example_family(k_max=20):
    return [geo.bidisc_example_segment(1 - 2.0 ** -k) for k in range(1, k_max + 1)]


def test_limit_set_of_example_family():
    gamma = vis.limit_set_estimate(_example_family())
    pts = gamma.points
    assert len(pts) > 3
    assert np.all(dm.boundary_distance_many(BIDISC, pts) <= 1e-9)
    # every cluster sits on the upper arc {-1} x [0,1], [-1,1] x {1}, {1} x [0,1]
    on_side = np.isclose(np.abs(pts[:, 0].real), 1, atol=1e-2) & (pts[:, 1].real >= -1e-2)
    on_top = np.isclose(pts[:, 1].real, 1, atol=1e-2)
    assert np.all(on_side | on_top)
    assert np.allclose(pts.imag, 0, atol=1e-2)


def test_limit_set_of_compact_path_is_empty():
    gamma = vis.limit_set_estimate([geo.bidisc_example_segment(0.5)])
    assert len(gamma.points) == 0


def test_limit_set_of_ray_is_its_landing_point():
    ray = geo.geodesic_ray(dm.Ball(2), [0, 0], [0.6, 0.8])
    gamma = vis.limit_set_estimate([ray])
    assert len(gamma.points) == 1 and np.allclose(gamma.points[0], [0.6, 0.8], atol=1e-2)


def test_farthest_point_clusters_resolution():
    pts = np.array([[0], [0.001], [1], [1.002], [2]], dtype=complex)
    idx, label = vis.farthest_point_clusters(pts, 0.1)
    assert len(idx) == 3 and len(set(label)) == 3


@pytest.mark.parametrize("p, q, verdict", [
    ([-1, 0], [1, 1], vis.CASE1),
    ([1, 0], [1, 1], vis.CASE2),
    ([-1, 1], [1, 1], vis.CASE2),
])
def test_classification_examples(p, q, verdict):
    gamma = vis.LimitSetEstimate(np.array([p, q], dtype=complex), np.ones(2, int), [], 1e-3, 1e-2)
    (cls,) = vis.conjecture1_classify(BIDISC, gamma)
    assert cls.verdict == verdict


def test_example_family_has_no_violation():
    gamma = vis.limit_set_estimate(_example_family())
    classes = vis.conjecture1_classify(BIDISC, gamma)
    assert classes and all(c.verdict != vis.VIOLATION for c in classes)


def test_classify_rejects_empty():
    with pytest.raises(ValueError):
        vis.conjecture1_classify(BIDISC, vis.limit_set_estimate([geo.bidisc_example_segment(0.5)]))
