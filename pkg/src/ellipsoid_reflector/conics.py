"""Ellipsoids of revolution with one focus at the origin.

An ellipsoid is fixed by its second focus ``x`` and focal parameter ``d``.
Its polar radius seen from the origin is ``d / (1 - eps * <m, k_x>)`` and,
by the same polar form with the axis reversed, its radius seen from ``x``
is ``d / (1 + eps * <u, k_x>)``.

All direction arguments accept a single 3-vector or an ``(N, 3)`` batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InvalidFocus(ValueError):
    pass


class InvalidParameter(ValueError):
    pass


# d below this fraction of |x| is a segment, not an ellipsoid
DEGENERATE_RATIO = 1e-12


def eccentricity(x, d: float) -> float:
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise InvalidFocus("second focus coincides with the origin")
    if not d > 0:
        raise InvalidParameter(f"focal parameter must be positive, got {d}")
    # sqrt(1 + s^2) - s rewritten without cancellation
    return r / (math.hypot(r, d) + d)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    x: np.ndarray
    d: float
    eps: float = field(init=False)
    k: np.ndarray = field(init=False, repr=False)
    dist: float = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(3)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", float(self.d))
        eps = eccentricity(x, self.d)
        dist = float(np.linalg.norm(x))
        if self.d < DEGENERATE_RATIO * dist:
            raise InvalidParameter("degenerate ellipsoid (d too small for |x|)")
        k = x / dist
        k.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "dist", dist)

    def __eq__(self, other):
        if not isinstance(other, Ellipsoid):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self.x, other.x))

    def __hash__(self):
        return hash((self.d, tuple(self.x)))

    @property
    def semi_major(self) -> float:
        return self.d / (1.0 - self.eps * self.eps)

    @property
    def semi_minor(self) -> float:
        return self.semi_major * math.sqrt(1.0 - self.eps * self.eps)

    @property
    def focal_sum(self) -> float:
        """Constant |p| + |p - x| over the surface."""
        return 2.0 * self.semi_major

    def radius(self, m):
        return self.d / (1.0 - self.eps * (np.asarray(m) @ self.k))

    def point(self, m):
        m = np.asarray(m, dtype=float)
        r = self.radius(m)
        return m * (r[..., None] if np.ndim(r) else r)

    def focus_radius(self, u):
        """Distance from ``x`` to the surface along unit direction ``u``."""
        return self.d / (1.0 + self.eps * (np.asarray(u) @ self.k))

    def focus_point(self, u):
        u = np.asarray(u, dtype=float)
        w = self.focus_radius(u)
        return self.x + u * (w[..., None] if np.ndim(w) else w)

    def normal(self, m):
        return surface_normal(self, m)

    def hits(self, origins, dirs, t_min=0.0):
        return ray_hits(self, origins, dirs, t_min)


def polar_radius(e: Ellipsoid, m):
    return e.radius(m)


def focal_parameter_through(p, x):
    """Focal parameter of the ellipsoid with foci 0 and ``x`` passing through ``p``."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    a = 0.5 * (np.linalg.norm(p, axis=-1) + np.linalg.norm(p - x, axis=-1))
    return a - float(x @ x) / (4.0 * a)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def surface_normal(e: Ellipsoid, m):
    """Outward unit normal at the surface point over direction ``m``.

    Gradient of |p| + |p - x|; outward, so ``<n, m> > 0``.
    """
    p = e.point(m)
    g = _unit(p) + _unit(p - e.x)
    return _unit(g)


def reflect_direction(m, n):
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    c = np.sum(m * n, axis=-1, keepdims=True)
    return m - 2.0 * c * n


def ray_hits(e: Ellipsoid, origins, dirs, t_min=0.0):
    """Batched ray/ellipsoid intersection.

    Returns an ``(N, 2)`` array of ray parameters, ascending, NaN where a
    root is missing or ``<= t_min``. Solved in the center frame aligned with
    the axis, then polished by one Newton step on the focal-sum function.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=float))
    u = np.atleast_2d(np.asarray(dirs, dtype=float))
    o, u = np.broadcast_arrays(o, u)
    k = e.k
    a2 = e.semi_major ** 2
    b2 = e.semi_minor ** 2
    q = o - 0.5 * e.x
    qk = q @ k
    uk = u @ k
    qp = q - qk[:, None] * k
    up = u - uk[:, None] * k
    A = uk * uk / a2 + np.einsum("ij,ij->i", up, up) / b2
    B = 2.0 * (qk * uk / a2 + np.einsum("ij,ij->i", qp, up) / b2)
    C = qk * qk / a2 + np.einsum("ij,ij->i", qp, qp) / b2 - 1.0
    disc = B * B - 4.0 * A * C
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    qq = -0.5 * (B + np.copysign(sq, B))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = qq / A
        t2 = np.where(qq != 0.0, C / qq, t1)
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    out = np.stack([lo, hi], axis=1)
    out[~ok] = np.nan
    out = _newton_polish(e, o, u, out)
    out[~(out > t_min)] = np.nan
    # keep NaNs last so column 0 is the first forward hit
    swap = np.isnan(out[:, 0]) & ~np.isnan(out[:, 1])
    out[swap] = out[swap][:, ::-1]
    return out


def _newton_polish(e, o, u, ts):
    two_a = e.focal_sum
    for j in range(2):
        t = ts[:, j]
        good = np.isfinite(t)
        if not good.any():
            continue
        tg = t[good]
        p = o[good] + tg[:, None] * u[good]
        r0 = np.linalg.norm(p, axis=1)
        r1 = np.linalg.norm(p - e.x, axis=1)
        f = r0 + r1 - two_a
        with np.errstate(divide="ignore", invalid="ignore"):
            df = np.einsum("ij,ij->i", u[good], p / r0[:, None] + (p - e.x) / r1[:, None])
            step = np.where(np.abs(df) > 1e-8, f / df, 0.0)
        # tangent grazes have df ~ 0; leave those roots alone
        ts[good, j] = tg - np.where(np.isfinite(step), step, 0.0)
    return ts


def ray_hit(e: Ellipsoid, origin, direction) -> list[float]:
    """Forward hits of a single ray, ascending (empty list = miss)."""
    ts = ray_hits(e, np.asarray(origin, dtype=float)[None], np.asarray(direction, dtype=float)[None])[0]
    return [float(t) for t in ts if np.isfinite(t)]
