import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kobalab import domains as dm
from kobalab import dynamics as dyn
from kobalab import geodesics as geo
from kobalab import metric
from kobalab.domains import DomainError

DISC = dm.Polydisc(1)
BIDISC = dm.Polydisc(2)
BALL = dm.Ball(2)


def hyp(step=0.7, sigma=1):
    return dyn.DiscHyperbolic(complex(sigma), step)


def par(step=1.0, sigma=1):
    return dyn.DiscParabolic(complex(sigma), step)


def rot(theta):
    return dyn.DiscMobius(0j, theta)


def half():
    return dyn.Linear(((0.5 + 0j,),))


def ball_hyperbolic(k):
    return dyn.BallAutomorphism((0.3 + 0.1 * k, 0j), ((-1, 0), (0, np.exp(1j * k))))


# -- expressions ---------------------------------------------------------------------

def test_identity_mobius():
    z = np.array([[0.3 - 0.2j], [0.0], [-0.9j]])
    assert np.allclose(rot(0.0)(z), z)


def test_hyperbolic_image_of_origin():
    c = 0.7
    assert hyp(c)(np.zeros((1, 1)))[0, 0] == pytest.approx((math.exp(c) - 1) / (math.exp(c) + 1), abs=1e-15)
    assert hyp(c, 1j)(np.zeros((1, 1)))[0, 0] == pytest.approx(1j * math.tanh(c / 2), abs=1e-15)


def test_disc_maps_fix_their_boundary_point():
    for f in (hyp(1.3, np.exp(0.4j)), par(2.0, np.exp(0.4j))):
        assert f(np.array([[np.exp(0.4j)]]))[0, 0] == pytest.approx(np.exp(0.4j))


def test_parabolic_preserves_horocycles():
    # |1 - z|^2 / (1 - |z|^2) is invariant under parabolic maps fixing 1
    z = np.array([0.1, 0.5 - 0.3j, -0.7j])[:, None]
    w = par(0.8)(z)
    q = lambda x: np.abs(1 - x) ** 2 / (1 - np.abs(x) ** 2)
    assert np.allclose(q(w), q(z))


def test_compose_order():
    f = dyn.Compose((dyn.Power(2), dyn.Linear(((0.5 + 0j,),))))
    assert f(np.array([[0.8]]))[0, 0] == pytest.approx(0.16)


def test_conjugate_acts_through_left_inverse():
    c = dyn.Conjugate(BIDISC, (0j, 0j), (0.5 + 0j, 0j), par())
    g = c._geo
    zeta = dyn.zeta_grid(10, 0.95)
    assert np.max(np.abs(g.rho(g.phi(zeta)) - zeta)) < 1e-10
    z = np.array([[0.2 + 0.1j, -0.3j]])
    assert np.allclose(c(z)[0], g.phi(par()(g.rho(z)[..., None])[..., 0])[0])
    F = dyn.HolomorphicMap(c, BIDISC)
    assert BIDISC.contains(dyn.evaluate(F, [0.2, 0.1]))


def test_ball_automorphism_validation():
    with pytest.raises(ValueError):
        dyn.BallAutomorphism((0.8, 0.8))
    with pytest.raises(ValueError):
        dyn.BallAutomorphism((0.1, 0), ((1, 1), (0, 1)))


def test_holomorphic_map_rejects_non_self_map():
    with pytest.raises(DomainError):
        dyn.HolomorphicMap(dyn.Linear(((2 + 0j,),)), DISC)
    with pytest.raises(DomainError):
        dyn.HolomorphicMap(dyn.Projection(1), BIDISC)
    assert not dyn.HolomorphicMap(dyn.Projection(1), BIDISC, DISC).is_self_map


ALL_EXPRS = [
    rot(0.3), dyn.DiscMobius(0.2 - 0.1j, 1.0), hyp(), par(), dyn.Power(3), dyn.Constant((0.1j,)),
    dyn.CoordMap((hyp(), rot(1.0))), ball_hyperbolic(1), dyn.Linear(((0.5, 0.1j), (0, 0.3))),
    dyn.Compose((hyp(), par())), dyn.Projection(2),
    dyn.Conjugate(BIDISC, (0j, 0j), (0.5 + 0j, 0j), par()),
]


@pytest.mark.parametrize("expr", ALL_EXPRS, ids=lambda e: e.kind)
def test_map_json_round_trip(expr):
    back = dyn.map_from_json(expr.to_json())
    assert back.to_json() == expr.to_json()
    dim = len(expr.z) if isinstance(expr, dyn.Conjugate) else 2 if expr.kind in (
        "coord_map", "ball_automorphism", "linear", "projection") else 1
    z = np.full((3, dim), 0.2 - 0.1j)
    assert np.allclose(back(z), expr(z))


def test_unknown_map_kind():
    with pytest.raises(ValueError):
        dyn.map_from_json({"map": "warp"})


def test_evaluate_preconditions():
    F = dyn.HolomorphicMap(hyp(), DISC)
    with pytest.raises(DomainError):
        dyn.evaluate(F, [1.5])


# -- orbits and records --------------------------------------------------------------

def test_record_examples():
    assert dyn.record_indices([0, 0.5, 1.2, 0.9, 1.5]) == [1, 2, 4]
    assert dyn.record_indices([0, 0, 0, 0]) == [1]


def test_identity_orbit():
    orb = dyn.iterate_orbit(dyn.HolomorphicMap(rot(0.0), DISC), [0.3], 10)
    assert np.all(orb.dist_to_start == 0) and orb.record_indices == [1]
    assert not orb.escaped and len(orb.cluster_estimate) == 0


def test_hyperbolic_orbit_closed_form():
    c = 0.4
    orb = dyn.iterate_orbit(dyn.HolomorphicMap(hyp(c), DISC), [0], 40)
    n = np.arange(41)
    assert np.allclose(orb.points[:, 0], np.tanh(n * c / 2), atol=1e-13)
    assert orb.record_indices == list(range(1, 41))
    assert np.allclose(orb.dist_to_start, n * c / 2, atol=1e-8)


@given(st.lists(st.floats(0, 100), min_size=2, max_size=40))
def test_records_have_prefix_max_property(d):
    recs = dyn.record_indices(d)
    assert recs[0] == 1
    for n in recs:
        assert max(d[1:n + 1]) <= d[n]
    # every strict new maximum is a record
    best = d[1]
    for n in range(2, len(d)):
        if d[n] > best:
            assert n in recs
            best = d[n]


def test_orbit_csv(tmp_path):
    orb = dyn.iterate_orbit(dyn.HolomorphicMap(hyp(), DISC), [0], 5)
    orb.write_csv(tmp_path / "orbit.csv")
    lines = (tmp_path / "orbit.csv").read_text().splitlines()
    assert lines[0] == "n,re_z1,im_z1,dist_to_start,is_record,boundary_distance" and len(lines) == 7


def _random_model_map(data):
    kind = data.draw(st.sampled_from(["coord", "ball", "linear"]))
    th = st.floats(0, 2 * math.pi)
    if kind == "ball":
        a = np.array([data.draw(st.floats(-0.6, 0.6)), data.draw(st.floats(-0.6, 0.6)) * 1j])
        q, _ = np.linalg.qr(np.array([[1, data.draw(th)], [data.draw(th), 1j]]))
        return dyn.HolomorphicMap(dyn.BallAutomorphism(tuple(a), tuple(map(tuple, q))), BALL)
    if kind == "linear":
        m = 0.5 * np.array([[data.draw(st.floats(-1, 1)), data.draw(st.floats(-1, 1)) * 1j],
                            [data.draw(st.floats(-1, 1)), data.draw(st.floats(-1, 1))]]) / 2
        return dyn.HolomorphicMap(dyn.Linear(tuple(map(tuple, m))), BALL)
    one = st.sampled_from([hyp(0.5), par(0.7), rot(1.0), dyn.DiscMobius(0.3j, 2.0), dyn.Power(2)])
    return dyn.HolomorphicMap(dyn.CoordMap((data.draw(one), data.draw(one))), BIDISC)


@given(st.data())
def test_orbit_gap_is_non_increasing(data):
    F = _random_model_map(data)
    z0 = 0.5 * dm.sample_interior(F.dom, 1, np.random.default_rng(data.draw(st.integers(0, 99))))[0]
    pts = dyn.iterate_orbit(F, z0, 20).points
    gap = metric.model_distance(F.dom, pts[1:], pts[:-1])
    ok = np.isfinite(gap) & (dm.boundary_distance_many(F.dom, pts[1:]) > 1e-6)
    g = gap[ok]
    assert np.all(np.diff(g) <= 1e-9 * np.maximum(1, g[1:]))


@given(st.data())
def test_two_start_shadowing(data):
    F = _random_model_map(data)
    rng = np.random.default_rng(data.draw(st.integers(0, 99)))
    z0, z1 = 0.5 * dm.sample_interior(F.dom, 2, rng)
    a, b = dyn.iterate_orbit(F, z0, 20).points, dyn.iterate_orbit(F, z1, 20).points
    ok = (dm.boundary_distance_many(F.dom, a) > 1e-6) & (dm.boundary_distance_many(F.dom, b) > 1e-6)
    d = metric.model_distance(F.dom, a[ok], b[ok])
    assert np.all(d <= metric.model_distance(F.dom, z0, z1) + 1e-9)


# -- target sets ---------------------------------------------------------------------

def test_rotation_has_empty_target_set():
    F = dyn.HolomorphicMap(rot(1.0), DISC)
    assert len(dyn.target_set_estimate(F, [[0.3], [-0.5j]], 300)) == 0


def test_hyperbolic_target_set_is_attracting_point():
    F = dyn.HolomorphicMap(hyp(0.7), DISC)
    T = dyn.target_set_estimate(F, [[0.3], [-0.5j], [0]], 200)
    assert len(T) == 1 and np.allclose(T.points[0], [1])


def test_product_target_set_lies_in_boundary_slice():
    F = dyn.HolomorphicMap(dyn.CoordMap((hyp(0.7), rot(math.sqrt(2)))), BIDISC)
    T = dyn.target_set_estimate(F, [[0, 0.5], [0.2, -0.3j]], 200)
    assert len(T) > 1 and np.allclose(T.points[:, 0], 1, atol=1e-5)
    assert dyn.slice_containment_check(T.points, [1, 0.9]).status == dyn.PASS


# -- horospheres ---------------------------------------------------------------------

def _disc_horo_spec(R=1.0):
    seq = (1 - 2.0 ** -np.arange(1, 51))[:, None].astype(complex)
    return dyn.HorosphereSpec(DISC, [0], seq, R)


def test_disc_horocycle_value():
    est = dyn.horosphere_limsup(_disc_horo_spec(), [0.5], tail=21)
    assert est.value == pytest.approx(0.5 * math.log(1 / 3), abs=1e-6)
    assert est.monotone and est.member


def test_start_lies_on_the_horosphere():
    est = dyn.horosphere_limsup(_disc_horo_spec(), [0], tail=10)
    assert est.value == 0 and not est.member
    assert dyn.horosphere_limsup(_disc_horo_spec(2.0), [0], tail=10).member


def test_sequence_point_is_deep_inside():
    spec = _disc_horo_spec()
    assert dyn.horosphere_limsup(spec, spec.sequence[30], tail=10).value < -5


def test_horosphere_preconditions():
    with pytest.raises(ValueError):
        dyn.horosphere_limsup(_disc_horo_spec(), [0.5], tail=60)
    with pytest.raises(ValueError):
        dyn.HorosphereSpec(DISC, [0], [[0.5], [0.6]])


@given(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95))
def test_horocycle_formula(x, y):
    z = complex(x, y)
    if abs(z) >= 0.95:
        return
    est = dyn.horosphere_limsup(_disc_horo_spec(), [z], tail=10)
    assert est.value == pytest.approx(0.5 * math.log(abs(1 - z) ** 2 / (1 - abs(z) ** 2)), abs=1e-5)


@pytest.mark.parametrize("expr, dom", [
    (hyp(0.1), DISC), (par(1.0), DISC),
    (dyn.CoordMap((hyp(0.3), par(1.0))), BIDISC),
    (dyn.CoordMap((par(0.5), rot(1.0))), BIDISC),
])
def test_orbits_stay_in_their_horospheres(expr, dom):
    F = dyn.HolomorphicMap(expr, dom)
    rep = dyn.horosphere_orbit_invariance_check(F, np.zeros(dom.dim), 200, 50)
    assert rep.status == dyn.PASS and rep.max_estimate <= 1e-6


def test_invariance_is_inconclusive_with_fixed_point():
    F = dyn.HolomorphicMap(rot(1.0), DISC)
    assert dyn.horosphere_orbit_invariance_check(F, [0.3], 50, 10).status == dyn.INCONCLUSIVE


# -- Julia inequality ----------------------------------------------------------------

JULIA_F = dyn.HolomorphicMap(dyn.CoordMap((hyp(0.5), half())), BIDISC)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_julia_inequality_on_record_data(m):
    rep = dyn.julia_polydisc_check(JULIA_F, m)
    assert rep.status == dyn.PASS
    assert rep.data.j0 == 1 and rep.data.sigma == pytest.approx(1)
    assert np.allclose(rep.data.q, [1, 0])


def test_julia_at_zeta_zero():
    rep = dyn.julia_polydisc_check(JULIA_F, 1, zetas=[0])
    assert rep.max_excess <= 0
    x = math.tanh(0.25)
    assert rep.max_excess == pytest.approx((1 - x) ** 2 / (1 - x * x) - 1)


def test_julia_identity_is_inconclusive():
    F = dyn.HolomorphicMap(dyn.CoordMap((rot(0.0), rot(0.0))), BIDISC)
    assert dyn.julia_polydisc_check(F, 1).status == dyn.INCONCLUSIVE


def test_julia_rejects_boundary_zeta():
    with pytest.raises(DomainError):
        dyn.julia_polydisc_check(JULIA_F, 1, zetas=[1.0])


def test_julia_rotated_attracting_point():
    s = np.exp(0.9j)
    F = dyn.HolomorphicMap(dyn.CoordMap((half(), hyp(0.6, s))), BIDISC)
    rep = dyn.julia_polydisc_check(F, 2)
    assert rep.status == dyn.PASS and rep.data.j0 == 2
    assert rep.data.sigma == pytest.approx(s)


# -- radial limits -------------------------------------------------------------------

def test_radial_projection():
    est = dyn.radial_limsup_estimate(dyn.Projection(1), [1, 0.3])
    assert est.estimate == pytest.approx(1.0) and not est.infinite


def test_radial_square():
    est = dyn.radial_limsup_estimate(dyn.Compose((dyn.Power(2), dyn.Projection(1))), [1, 0.3])
    assert est.estimate == pytest.approx(2.0, abs=1e-5)


def test_radial_constant_is_infinite():
    est = dyn.radial_limsup_estimate(dyn.Constant((0.3 + 0j,)), [1, 0.3])
    assert est.infinite and est.estimate == math.inf


# -- containment and Denjoy-Wolff ----------------------------------------------------

@pytest.mark.parametrize("pts, status, witness", [
    ([[1, 0.2]], dyn.PASS, 1), ([[0.5, 1]], dyn.PASS, 2), ([[0.5, 0.5]], dyn.FAIL, None),
])
def test_slice_containment_examples(pts, status, witness):
    rep = dyn.slice_containment_check(pts, [1, 0.9])
    assert rep.status == status and rep.witnesses == [witness]


def test_ball_automorphisms_converge():
    rng = np.random.default_rng(3)
    starts = 0.9 * dm.sample_interior(BALL, 4, rng)
    for k in range(3):
        v = dyn.denjoy_wolff_verdict(dyn.HolomorphicMap(ball_hyperbolic(k), BALL), starts, 500)
        assert v.status == dyn.CONVERGES_TO and np.allclose(v.point, [-1, 0])


def test_product_with_rotation_has_multiple_points():
    F = dyn.HolomorphicMap(dyn.CoordMap((hyp(0.7), rot(math.sqrt(2)))), BIDISC)
    v = dyn.denjoy_wolff_verdict(F, [[0, 0.5], [0.2, -0.3j]], 300)
    assert v.status == dyn.MULTIPLE_POINTS
    assert np.allclose(v.clusters[:, 0], 1, atol=1e-5)


def test_rotation_verdict_is_inconclusive():
    v = dyn.denjoy_wolff_verdict(dyn.HolomorphicMap(rot(1.0), DISC), [[0.3]], 300)
    assert v.status == dyn.INCONCLUSIVE and len(v.clusters) == 0


@given(st.integers(0, 1000))
def test_ball_never_reports_multiple_points(seed):
    rng = np.random.default_rng(seed)
    a = 0.7 * dm.sample_interior(BALL, 1, rng)[0]
    q, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    F = dyn.HolomorphicMap(dyn.BallAutomorphism(tuple(a), tuple(map(tuple, q))), BALL)
    v = dyn.denjoy_wolff_verdict(F, 0.9 * dm.sample_interior(BALL, 3, rng), 300)
    assert v.status != dyn.MULTIPLE_POINTS


def test_invariance_range_shrinks_when_orbit_saturates():
    F = dyn.HolomorphicMap(dyn.CoordMap((hyp(0.3), par(1.0))), BIDISC)
    rep = dyn.horosphere_orbit_invariance_check(F, [0, 0], 200, 50)
    assert rep.status == dyn.PASS and "checked n <=" in rep.reason
    assert len(rep.estimates) == rep.records[0] - 1 >= 50
