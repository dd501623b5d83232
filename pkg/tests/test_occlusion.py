import numpy as np
import pytest
from hypothesis import given, strategies as st

from ellipsoid_reflector.conics import Ellipsoid
from ellipsoid_reflector.occlusion import (
    ApexQuery,
    Cone,
    ConeShadow,
    PatchGeometry,
    SlabLift,
    blocking_witness,
    cone_contains,
    mutual_clear,
    patch_blocks,
    same_target_clearance_check,
)
from ellipsoid_reflector.sphere import Cap, ZHAT, sample_in_region

from conftest import stacked_pair, unit

X = np.array([0.0, 0.0, -2.0])


def geo(x, d, region):
    return PatchGeometry(Ellipsoid(np.asarray(x, dtype=float), d), region)


def test_cone_examples():
    a = geo(X, 1.5, Cap(ZHAT, 0.9))
    m = unit(np.array([0.1, 0.05, 1.0]))
    p = a.ellipsoid.point(m)
    assert cone_contains(Cone(np.zeros(3), a), 0.5 * p)
    assert not cone_contains(Cone(np.zeros(3), a), 2 * p)
    assert cone_contains(Cone(np.zeros(3), a, True), 2 * p)
    assert cone_contains(Cone(X, a), X + 0.4 * (p - X))
    assert not cone_contains(Cone(X, a), X + 1.5 * (p - X))
    with pytest.raises(ApexQuery):
        cone_contains(Cone(X, a), X)


def test_finite_cone_inside_infinite():
    rng = np.random.default_rng(0)
    a = geo(X, 1.2, Cap(unit([0.2, 0, 1.0]), 0.8))
    pts = rng.normal(size=(4000, 3)) * 2
    fin = cone_contains(Cone(X, a), pts)
    inf = cone_contains(Cone(X, a, True), pts)
    assert fin.any()
    assert np.all(inf[fin])


def test_patch_points_on_ellipsoid():
    a = geo([1.0, 0.5, -1.0], 0.8, Cap(unit([0.1, 0.1, 1]), 0.7))
    m, p = a.sample(2000)
    s = np.linalg.norm(p, axis=1) + np.linalg.norm(p - a.ellipsoid.x, axis=1)
    np.testing.assert_allclose(s, a.ellipsoid.focal_sum, rtol=1e-10)
    assert a.region.contains(m).all()


def test_empty_region_rejected():
    with pytest.raises(ValueError):
        geo(X, 1.0, Cap(ZHAT, 1.0))


def test_disjoint_caps_on_one_ellipsoid_do_not_block():
    e_regions = [Cap(unit([0.4, 0, 1]), 0.98), Cap(unit([-0.4, 0, 1]), 0.98)]
    a, b = (geo(X, 1.5, r) for r in e_regions)
    assert not patch_blocks(a, X, b)
    assert not patch_blocks(b, X, a)
    assert mutual_clear([(a, X), (b, X)]) == (True, None)


def test_blocking_pair_detected(blocking_pair):
    _, pa, pb, c = blocking_pair
    assert patch_blocks(pa.geometry, pa.target, pb.geometry)
    w = blocking_witness(pa.geometry, pa.target, pb.geometry)
    assert w is not None and np.linalg.norm(w - c) < 1.0
    ok, pair = mutual_clear([(pa.geometry, pa.target), (pb.geometry, pb.target)])
    assert not ok and pair == (0, 1)


def test_self_test_rejected():
    a = geo(X, 1.5, Cap(ZHAT, 0.9))
    with pytest.raises(ValueError):
        patch_blocks(a, X, a)
    with pytest.raises(ValueError):
        mutual_clear([])


def test_single_patch_clear():
    assert mutual_clear([(geo(X, 1.5, Cap(ZHAT, 0.9)), X)])[0]


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_clearance_conditions_agree(seed, blocking):
    rng = np.random.default_rng(seed)
    a, b, x = stacked_pair(rng, blocking)
    rep = same_target_clearance_check(a, b, x, n_occ=1024, seed=seed % 1000)
    assert rep["agree"]
    if blocking:
        assert not rep["finite_two_way"]


def test_blocking_monotone_in_region_growth(blocking_pair):
    _, pa, pb, c = blocking_pair
    axis = unit(c)
    hits = []
    for level in (0.9999, 0.9995, 0.999, 0.99):
        b = PatchGeometry(pb.ellipsoid, Cap(axis, level))
        hits.append(patch_blocks(pa.geometry, pa.target, b))
    # once blocking, larger regions stay blocking
    assert hits == sorted(hits)
    assert hits[-1]


def test_cone_shadow_matches_direct_test():
    a = geo(X, 1.2, Cap(ZHAT, 0.95))
    carrier = Ellipsoid(X, 1.6)
    shadow = ConeShadow(X, a, True, carrier)
    m = sample_in_region(Cap(ZHAT, 0.8), 2000, seed=1)
    p = carrier.point(m)
    np.testing.assert_array_equal(shadow.contains(m), cone_contains(Cone(X, a, True), p))
    lift = SlabLift(carrier, 1.0, 1.2)
    z = m[:, 2] * carrier.radius(m)
    np.testing.assert_array_equal(lift.contains(m), (z > 1.0) & (z < 1.2))
