"""Open regions of the unit sphere as predicate trees.

Every region answers ``contains(m)`` for a single direction or an ``(N, 3)``
batch. Primitives use strict inequalities, so regions are open; closures
differ only on measure-zero boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_REGISTRY: dict[str, type] = {}

ZHAT = np.array([0.0, 0.0, 1.0])


def register(kind):
    def deco(cls):
        cls.kind = kind
        _REGISTRY[kind] = cls
        return cls
    return deco


def _as_batch(m):
    m = np.asarray(m, dtype=float)
    return m.reshape(-1, 3), m.ndim == 1


def _unit3(v):
    v = np.array(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("axis must be nonzero")
    return v / n


class Region:
    """Base class; subclasses implement ``_contains`` on ``(N, 3)`` arrays."""

    kind = "abstract"

    def contains(self, m):
        batch, single = _as_batch(m)
        out = self._contains(batch)
        return bool(out[0]) if single else out

    def _contains(self, m):
        raise NotImplementedError

    def bounding_cap(self):
        """(axis, level) of a cap containing the region; level -1 is the sphere."""
        return ZHAT, -1.0

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))

    def __sub__(self, other):
        return Difference(self, other)


def region_contains(r: Region, m):
    return r.contains(m)


@register("full")
@dataclass(frozen=True)
class FullSphere(Region):
    def _contains(self, m):
        return np.ones(len(m), dtype=bool)

    def to_dict(self):
        return {"kind": "full"}


@register("empty")
@dataclass(frozen=True)
class EmptyRegion(Region):
    def _contains(self, m):
        return np.zeros(len(m), dtype=bool)

    def bounding_cap(self):
        return ZHAT, 1.0

    def to_dict(self):
        return {"kind": "empty"}


@register("cap")
@dataclass(frozen=True, eq=False)
class Cap(Region):
    axis: np.ndarray
    level: float

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit3(self.axis))
        if not -1.0 <= self.level <= 1.0:
            raise ValueError(f"cap level {self.level} outside [-1, 1]")

    def _contains(self, m):
        return m @ self.axis > self.level

    def bounding_cap(self):
        return self.axis, self.level

    @property
    def area(self):
        return 2.0 * math.pi * (1.0 - self.level)

    def to_dict(self):
        return {"kind": "cap", "axis": self.axis.tolist(), "level": self.level}


@register("band")
@dataclass(frozen=True, eq=False)
class Band(Region):
    axis: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit3(self.axis))
        if not -1.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError("band needs -1 <= lower <= upper <= 1")

    def _contains(self, m):
        u = m @ self.axis
        return (u > self.lower) & (u < self.upper)

    def bounding_cap(self):
        return self.axis, self.lower

    def to_dict(self):
        return {"kind": "band", "axis": self.axis.tolist(), "lower": self.lower, "upper": self.upper}


def wedge_azimuth_window(k: int, i: int, t: float):
    """Open azimuth interval of the i-th of k wedges about the z-axis, offset t."""
    half = math.pi / k
    centre = 2.0 * math.pi * i / k + t
    return centre - half, centre + half


@register("wedge")
@dataclass(frozen=True)
class Wedge(Region):
    """Azimuthal wedge about the z-axis of width 2*pi/k centred on 2*pi*i/k + t."""

    k: int
    i: int
    t: float = 0.0

    def __post_init__(self):
        if self.k < 1 or not 0 <= self.i < self.k:
            raise ValueError(f"bad wedge index ({self.k}, {self.i})")

    def _contains(self, m):
        if self.k == 1:
            return np.ones(len(m), dtype=bool)
        lo, hi = wedge_azimuth_window(self.k, self.i, self.t)
        centre = 0.5 * (lo + hi)
        phi = np.arctan2(m[:, 1], m[:, 0])
        rel = np.mod(phi - centre + math.pi, 2.0 * math.pi) - math.pi
        return np.abs(rel) < math.pi / self.k

    def to_dict(self):
        return {"kind": "wedge", "k": self.k, "i": self.i, "t": self.t}


@register("halfspace")
@dataclass(frozen=True, eq=False)
class HalfSpaceProj(Region):
    """Projection of the open half-space {p : <normal, p> > 0}."""

    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "normal", _unit3(self.normal))

    def _contains(self, m):
        return m @ self.normal > 0.0

    def bounding_cap(self):
        return self.normal, 0.0

    def to_dict(self):
        return {"kind": "halfspace", "normal": self.normal.tolist()}


def _tightest(caps):
    return min(caps, key=lambda c: 1.0 - c[1])


@register("union")
@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    def _contains(self, m):
        out = np.zeros(len(m), dtype=bool)
        for p in self.parts:
            rest = ~out
            if not rest.any():
                break
            out[rest] = p._contains(m[rest])
        return out

    def bounding_cap(self):
        caps = [p.bounding_cap() for p in self.parts]
        axis = caps[0][0]
        if all(np.allclose(c[0], axis) for c in caps):
            return axis, min(c[1] for c in caps)
        return ZHAT, -1.0

    def to_dict(self):
        return {"kind": "union", "parts": [p.to_dict() for p in self.parts]}


@register("intersection")
@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    def _contains(self, m):
        out = np.ones(len(m), dtype=bool)
        for p in self.parts:
            live = np.flatnonzero(out)
            if live.size == 0:
                break
            out[live] = p._contains(m[live])
        return out

    def bounding_cap(self):
        return _tightest([p.bounding_cap() for p in self.parts])

    def to_dict(self):
        return {"kind": "intersection", "parts": [p.to_dict() for p in self.parts]}


@register("difference")
@dataclass(frozen=True)
class Difference(Region):
    base: Region
    removed: Region

    def _contains(self, m):
        out = self.base._contains(m)
        live = np.flatnonzero(out)
        if live.size:
            out[live] = ~self.removed._contains(m[live])
        return out

    def bounding_cap(self):
        return self.base.bounding_cap()

    def to_dict(self):
        return {"kind": "difference", "base": self.base.to_dict(), "removed": self.removed.to_dict()}


def region_from_dict(d: dict, context=None) -> Region:
    """Rebuild a region tree; ``context`` resolves references (e.g. carve cells)."""
    kind = d["kind"]
    if kind in ("union", "intersection"):
        cls = _REGISTRY[kind]
        return cls(tuple(region_from_dict(p, context) for p in d["parts"]))
    if kind == "difference":
        return Difference(region_from_dict(d["base"], context), region_from_dict(d["removed"], context))
    if kind not in _REGISTRY:
        raise ValueError(f"unknown region kind {kind!r}")
    cls = _REGISTRY[kind]
    if hasattr(cls, "from_dict"):
        return cls.from_dict(d, context)
    args = {k: v for k, v in d.items() if k != "kind"}
    return cls(**args)


def symmetric_interval(r: Region, axis) -> tuple[float, float] | None:
    """Interval of <axis, m> describing ``r`` if it is a cap/band/sphere about ``axis``."""
    axis = _unit3(axis)
    if isinstance(r, FullSphere):
        return -1.0, 1.0
    if isinstance(r, Cap) and np.allclose(r.axis, axis, atol=1e-14):
        return r.level, 1.0
    if isinstance(r, Band) and np.allclose(r.axis, axis, atol=1e-14):
        return r.lower, r.upper
    return None
