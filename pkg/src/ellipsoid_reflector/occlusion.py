"""Cones over ellipsoid patches and sampled interference predicates.

A patch is the part of an ellipsoid lying over a spherical region. The cone
``C(apex, patch)`` is the union of segments from ``apex`` to the patch; the
infinite cone continues those segments into rays. Interference between
patches is decided on ``n_occ`` sampled surface points, which makes the
sampling density the soundness knob of every predicate here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conics import Ellipsoid
from .sphere.measure import project
from .sphere.regions import Region, register, region_from_dict
from .sphere.sampling import sample_in_region

N_OCC = 4096
# a point is inside a finite cone only if it clears the patch by this much
RAY_TOL = 1e-9


class ApexQuery(ValueError):
    pass


def ellipsoid_to_dict(e: Ellipsoid) -> dict:
    return {"x": e.x.tolist(), "d": e.d}


def ellipsoid_from_dict(d: dict) -> Ellipsoid:
    return Ellipsoid(np.array(d["x"], dtype=float), float(d["d"]))


@dataclass(frozen=True, eq=False)
class PatchGeometry:
    ellipsoid: Ellipsoid
    region: Region
    check: bool = True

    def __post_init__(self):
        if self.check and len(sample_in_region(self.region, 1, seed=0, max_rounds=8)) == 0:
            raise ValueError("patch region looks empty")

    def sample(self, n: int = N_OCC, seed: int = 0):
        """Directions in the region and the matching surface points."""
        m = sample_in_region(self.region, n, seed)
        return m, self.ellipsoid.point(m)

    def to_dict(self):
        return {"ellipsoid": ellipsoid_to_dict(self.ellipsoid), "region": self.region.to_dict()}

    @classmethod
    def from_dict(cls, d, context=None):
        return cls(ellipsoid_from_dict(d["ellipsoid"]), region_from_dict(d["region"], context), check=False)


@dataclass(frozen=True, eq=False)
class Cone:
    apex: np.ndarray
    patch: PatchGeometry
    infinite: bool = False

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float).reshape(3))


def _patch_hits(patch: PatchGeometry, apex, u):
    """Ray parameters (N, 2) where rays from ``apex`` along ``u`` meet the patch."""
    e = patch.ellipsoid
    if np.array_equal(apex, e.x):
        # from the interior focus there is exactly one forward hit
        ts = np.full((len(u), 2), np.nan)
        ts[:, 0] = e.focus_radius(u)
    elif not np.any(apex):
        ts = np.full((len(u), 2), np.nan)
        ts[:, 0] = e.radius(u)
    else:
        ts = e.hits(apex, u)
    for j in range(2):
        t = ts[:, j]
        ok = np.isfinite(t)
        if ok.any():
            h = apex + t[ok, None] * u[ok]
            inreg = patch.region.contains(project(h))
            idx = np.flatnonzero(ok)
            t[idx[~inreg]] = np.nan
    return ts


def cone_contains(c: Cone, p):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    P = p.reshape(-1, 3)
    v = P - c.apex
    s = np.linalg.norm(v, axis=1)
    if np.any(s == 0):
        raise ApexQuery("query point coincides with the cone apex")
    u = v / s[:, None]
    ts = _patch_hits(c.patch, c.apex, u)
    if c.infinite:
        out = np.isfinite(ts).any(axis=1)
    else:
        with np.errstate(invalid="ignore"):
            out = (s[:, None] < ts - RAY_TOL * (1.0 + ts)).any(axis=1)
    return bool(out[0]) if single else out


def blocking_witness(a: PatchGeometry, target_a, b: PatchGeometry, n_occ=N_OCC, seed=0, infinite=False):
    """First sampled point of ``b`` inside the cone from ``target_a`` over ``a``, or None."""
    if a is b:
        raise ValueError("a patch cannot be tested against itself")
    _, pts = b.sample(n_occ, seed)
    if len(pts) == 0:
        return None
    inside = cone_contains(Cone(target_a, a, infinite), pts)
    hit = np.flatnonzero(inside)
    return pts[hit[0]] if hit.size else None


def patch_blocks(a: PatchGeometry, target_a, b: PatchGeometry, n_occ=N_OCC, seed=0) -> bool:
    """True when ``b`` intrudes into the reflected beam of ``a`` toward its target."""
    return blocking_witness(a, target_a, b, n_occ, seed) is not None


def mutual_clear(items, n_occ=N_OCC, seed=0):
    """``items`` is a list of (PatchGeometry, target). Returns (clear, offending pair or None)."""
    if len(items) < 1:
        raise ValueError("need at least one patch")
    samples = [p.sample(n_occ, seed + i)[1] for i, (p, _) in enumerate(items)]
    for i, (pa, xa) in enumerate(items):
        cone = Cone(xa, pa)
        for j, (pb, _) in enumerate(items):
            if i == j or len(samples[j]) == 0:
                continue
            if cone_contains(cone, samples[j]).any():
                return False, (i, j)
    return True, None


def _partner_points(src_pts, other: PatchGeometry, x):
    """Points of ``other`` met by the rays from ``x`` through ``src_pts``."""
    if len(src_pts) == 0:
        return np.empty((0, 3))
    v = src_pts - x
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    t = _patch_hits(other, x, u)[:, 0]
    ok = np.isfinite(t)
    return x + t[ok, None] * u[ok]


def same_target_clearance_check(a: PatchGeometry, b: PatchGeometry, x, n_occ=N_OCC, seed=0) -> dict:
    """Two-way finite-cone clearance versus one-way infinite-cone clearance.

    Both patches share the focus ``x``, so every ray from ``x`` meets each
    ellipsoid once. Each condition is evaluated on the same ray set: the
    sampled points of both patches plus the partner points their rays meet.
    """
    x = np.asarray(x, dtype=float)
    _, pa = a.sample(n_occ, seed)
    _, pb = b.sample(n_occ, seed + 1)
    pa_all = np.concatenate([pa, _partner_points(pb, a, x)])
    pb_all = np.concatenate([pb, _partner_points(pa, b, x)])

    def any_in(cone, pts):
        return bool(len(pts)) and bool(cone_contains(cone, pts).any())

    finite_clear = not (any_in(Cone(x, a), pb_all) or any_in(Cone(x, b), pa_all))
    ray_clear = not any_in(Cone(x, a, True), pb_all)
    return {"finite_two_way": finite_clear, "infinite_one_way": ray_clear,
            "agree": finite_clear == ray_clear, "samples": n_occ}


@register("slab-lift")
@dataclass(frozen=True, eq=False)
class SlabLift(Region):
    """Directions whose point on ``carrier`` has height strictly inside (lo, hi)."""

    carrier: Ellipsoid
    lo: float
    hi: float

    def _contains(self, m):
        z = m[:, 2] * self.carrier.radius(m)
        return (z > self.lo) & (z < self.hi)

    def to_dict(self):
        return {"kind": "slab-lift", "carrier": ellipsoid_to_dict(self.carrier), "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d, context=None):
        return cls(ellipsoid_from_dict(d["carrier"]), d["lo"], d["hi"])


@register("cone-shadow")
@dataclass(frozen=True, eq=False)
class ConeShadow(Region):
    """Directions whose point on ``carrier`` lies in ``Cone(apex, patch, infinite)``.

    With the carrier equal to the patch ellipsoid and apex at the origin this is
    the patch region itself; with apex at a target it marks the part of the
    carrier shadowed by (or shadowing) the patch as seen from that target.
    """

    apex: np.ndarray
    patch: PatchGeometry
    infinite: bool
    carrier: Ellipsoid

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float).reshape(3))

    def _contains(self, m):
        p = self.carrier.point(m)
        away = np.linalg.norm(p - self.apex, axis=1) > 0
        out = np.zeros(len(m), dtype=bool)
        out[away] = cone_contains(Cone(self.apex, self.patch, self.infinite), p[away])
        return out

    def to_dict(self):
        return {"kind": "cone-shadow", "apex": list(map(float, self.apex)), "patch": self.patch.to_dict(),
                "infinite": self.infinite, "carrier": ellipsoid_to_dict(self.carrier)}

    @classmethod
    def from_dict(cls, d, context=None):
        return cls(np.array(d["apex"], dtype=float), PatchGeometry.from_dict(d["patch"], context),
                   bool(d["infinite"]), ellipsoid_from_dict(d["carrier"]))
