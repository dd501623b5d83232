import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ellipsoid_reflector.conics import (
    Ellipsoid,
    InvalidFocus,
    InvalidParameter,
    eccentricity,
    focal_parameter_through,
    polar_radius,
    ray_hit,
    ray_hits,
    reflect_direction,
    surface_normal,
)

from conftest import unit


def random_dirs(rng, n):
    return unit(rng.normal(size=(n, 3)))


def test_eccentricity_examples():
    assert eccentricity([0, 0, 1], 1.0) == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert eccentricity([1, 0, 0], 10.0) == pytest.approx(math.sqrt(101) - 10, rel=1e-12)
    assert eccentricity([0, 0, -1], 1e-8) > 1 - 1e-7


def test_eccentricity_rejects_bad_input():
    with pytest.raises(InvalidFocus):
        eccentricity([0, 0, 0], 1.0)
    with pytest.raises(InvalidParameter):
        eccentricity([0, 0, 1], 0.0)
    with pytest.raises(InvalidParameter):
        Ellipsoid(np.array([0, 0, 1.0]), 1e-13)


def test_eccentricity_range_many():
    rng = np.random.default_rng(0)
    r = 10 ** rng.uniform(-1, 2, 10_000)
    d = 10 ** rng.uniform(-4, 4, 10_000)
    eps = np.array([eccentricity([0, 0, ri], di) for ri, di in zip(r, d)])
    assert np.all((eps > 0) & (eps < 1))


def test_polar_identities():
    e = Ellipsoid(np.array([0.3, -1.2, -0.7]), 0.8)
    assert polar_radius(e, e.k) * (1 - e.eps) == pytest.approx(e.d, rel=1e-14)
    assert polar_radius(e, -e.k) * (1 + e.eps) == pytest.approx(e.d, rel=1e-14)
    perp = unit(np.cross(e.k, [1.0, 0, 0]))
    assert polar_radius(e, perp) == pytest.approx(e.d, rel=1e-14)


def test_polar_radius_on_axis_example():
    e = Ellipsoid(np.array([0, 0, 1.0]), 1.0)
    np.testing.assert_allclose(polar_radius(e, np.array([0, 0, 1.0])), 1 / (2 - math.sqrt(2)), rtol=1e-12)


def test_focal_sum_constant():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=3) * rng.uniform(0.2, 5)
        e = Ellipsoid(x, rng.uniform(0.1, 5))
        m = random_dirs(rng, 100)
        p = e.point(m)
        s = np.linalg.norm(p, axis=1) + np.linalg.norm(p - x, axis=1)
        np.testing.assert_allclose(s, e.d / (1 - e.eps) + e.d / (1 + e.eps), rtol=1e-10)


def test_same_foci_under_scaling():
    x = np.array([1.0, 2.0, -3.0])
    a, b = Ellipsoid(x, 0.7), Ellipsoid(x, 0.7 * 3.1)
    np.testing.assert_array_equal(a.x, b.x)


def test_focal_parameter_through_inverts_radius():
    rng = np.random.default_rng(2)
    x = np.array([0.5, 0.1, -2.0])
    e = Ellipsoid(x, 1.3)
    p = e.point(random_dirs(rng, 50))
    np.testing.assert_allclose(focal_parameter_through(p, x), 1.3, rtol=1e-12)


def test_normal_vertices():
    e = Ellipsoid(np.array([0.0, 2.0, 0.0]), 0.5)
    np.testing.assert_allclose(surface_normal(e, e.k), e.k, atol=1e-14)
    np.testing.assert_allclose(surface_normal(e, -e.k), -e.k, atol=1e-14)


def test_normal_matches_finite_difference():
    rng = np.random.default_rng(3)
    x = np.array([0.4, -0.3, -1.5])
    e = Ellipsoid(x, 0.9)
    F = lambda p: np.linalg.norm(p) + np.linalg.norm(p - x)
    h = 1e-6
    for m in random_dirs(rng, 25):
        p = e.point(m)
        grad = np.array([(F(p + h * ei) - F(p - h * ei)) / (2 * h) for ei in np.eye(3)])
        np.testing.assert_allclose(surface_normal(e, m), grad / np.linalg.norm(grad), atol=1e-6)
        assert surface_normal(e, m) @ m > 0


def test_reflect_examples():
    m = np.array([1.0, 0, 0])
    np.testing.assert_allclose(reflect_direction(m, m), -m)
    n = np.array([math.sqrt(2) / 2, -math.sqrt(2) / 2, 0])
    np.testing.assert_allclose(reflect_direction(m, n), [0, 1, 0], atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_reflection_involution_and_law(seed):
    rng = np.random.default_rng(seed)
    m, n = random_dirs(rng, 2)
    y = reflect_direction(m, n)
    np.testing.assert_allclose(reflect_direction(y, n), m, atol=1e-12)
    assert np.linalg.norm(y) == pytest.approx(1, abs=1e-12)
    assert y @ n == pytest.approx(-(m @ n), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_focal_property(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=3) * rng.uniform(0.5, 10)
    e = Ellipsoid(x, rng.uniform(0.1, 10))
    m = random_dirs(rng, 50)
    y = reflect_direction(m, surface_normal(e, m))
    to_x = unit(x - e.point(m))
    assert np.abs(np.cross(y, to_x)).max() < 1e-9
    assert np.all(np.einsum("ij,ij->i", y, to_x) > 0)


def test_ray_hit_examples():
    e = Ellipsoid(np.array([0, 0, -1.0]), 1.0)
    m = unit(np.array([0.3, 0.2, 0.9]))
    (t,) = ray_hit(e, np.zeros(3), m)
    assert t == pytest.approx(polar_radius(e, m), rel=1e-10)
    far = np.array([0, 0, 50.0])
    assert ray_hit(e, far, np.array([0, 0, 1.0])) == []
    assert len(ray_hit(e, e.x, unit(np.array([1.0, -2.0, 0.5])))) == 1
    assert len(ray_hit(e, far, np.array([0, 0, -1.0]))) == 2


def test_ray_hit_matches_polar_radius_many():
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.normal(size=3) * rng.uniform(0.2, 5)
        e = Ellipsoid(x, rng.uniform(0.05, 5))
        m = random_dirs(rng, 1000)
        ts = ray_hits(e, np.zeros(3), m)
        np.testing.assert_allclose(ts[:, 0], polar_radius(e, m), rtol=1e-10)
        assert np.all(np.isnan(ts[:, 1]))


@given(st.integers(0, 2**32 - 1))
def test_ray_hits_lie_on_surface(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=3)
    e = Ellipsoid(x, rng.uniform(0.2, 3))
    o = rng.normal(size=(200, 3)) * 4
    u = random_dirs(rng, 200)
    ts = ray_hits(e, o, u)
    for j in range(2):
        ok = np.isfinite(ts[:, j])
        p = o[ok] + ts[ok, j, None] * u[ok]
        s = np.linalg.norm(p, axis=1) + np.linalg.norm(p - x, axis=1)
        np.testing.assert_allclose(s, e.focal_sum, rtol=1e-9)
    both = np.isfinite(ts).all(axis=1)
    assert np.all(ts[both, 0] <= ts[both, 1])
