"""Exact membership for regions produced by cone-removal carving.

A carve cell holds one target ``x``, a base region ``U``, a slab
``lo < z < hi`` and the focal parameters ``d_0, d_1, ...`` chosen so far.
Patch ``j`` covers direction ``m`` when its surface point lies in the slab
over ``U`` and stays clear of every earlier patch, both along the ray from
the origin (``m`` not owned by an earlier patch) and along the ray from
``x`` (the point does not sit in front of, or behind, an earlier patch as
seen from the target).

All ellipsoids in a cell share the focus ``x``, so a ray from ``x`` meets
each of them exactly once at ``x + u * w_j(u)``. That turns the mutual
dependency between patches into two ownership queries that recurse on
strictly fewer patches:

* ``owner(m, bound)``: first patch ``j < bound`` covering direction ``m``;
* ``ray_owner(u, bound)``: first patch ``i < bound`` met by the ray from ``x``
  along ``u`` inside its own region.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..conics import Ellipsoid
from ..sphere.regions import Region, register, region_from_dict


def _unit(v):
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(eq=False)
class CarveCell:
    base: Region
    lo: float
    hi: float
    target: np.ndarray
    ds: list = field(default_factory=list)

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).reshape(3)
        if not self.hi > self.lo:
            raise ValueError("empty slab")
        self._ell = [Ellipsoid(self.target, d) for d in self.ds]

    @property
    def ellipsoids(self):
        return list(self._ell)

    def add(self, d: float) -> int:
        self.ds.append(float(d))
        self._ell.append(Ellipsoid(self.target, d))
        return len(self.ds) - 1

    def in_slab(self, p):
        return (p[:, 2] > self.lo) & (p[:, 2] < self.hi)

    def owner(self, m, bound: int | None = None):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        bound = len(self.ds) if bound is None else min(bound, len(self.ds))
        res = np.full(len(m), -1, dtype=np.int64)
        idx = np.flatnonzero(self.base.contains(m)) if len(m) else np.empty(0, dtype=np.int64)
        for j in range(bound):
            if idx.size == 0:
                break
            mj = m[idx]
            r = self._ell[j].radius(mj)
            z = mj[:, 2] * r
            ok = (z > self.lo) & (z < self.hi)
            if not ok.any():
                continue
            sel = idx[ok]
            p = mj[ok] * r[ok, None]
            free = self.ray_owner(_unit(p - self.target), j) < 0
            res[sel[free]] = j
            idx = idx[res[idx] < 0]
        return res

    def ray_owner(self, u, bound: int):
        u = np.atleast_2d(u)
        res = np.full(len(u), -1, dtype=np.int64)
        idx = np.arange(len(u))
        for i in range(min(bound, len(self.ds))):
            if idx.size == 0:
                break
            q = self._ell[i].focus_point(u[idx])
            ok = (q[:, 2] > self.lo) & (q[:, 2] < self.hi)
            if not ok.any():
                continue
            sel = idx[ok]
            mq = _unit(q[ok])
            inb = self.base.contains(mq)
            if not inb.any():
                continue
            sel = sel[inb]
            mq = mq[inb]
            # the ray meets patch i inside its region iff mq is not owned earlier
            hit = self.owner(mq, i) < 0
            res[sel[hit]] = i
            idx = idx[res[idx] < 0]
        return res

    def newly_covered(self, m, d: float):
        """Mask of directions (assumed unowned) that a new patch at ``d`` would cover."""
        e = Ellipsoid(self.target, d)
        r = e.radius(m)
        z = m[:, 2] * r
        ok = (z > self.lo) & (z < self.hi)
        out = np.zeros(len(m), dtype=bool)
        if ok.any():
            p = m[ok] * r[ok, None]
            out[np.flatnonzero(ok)] = self.ray_owner(_unit(p - self.target), len(self.ds)) < 0
        return out

    def region(self, j: int) -> "CarvedRegion":
        return CarvedRegion(self, j)

    def to_dict(self):
        return {"base": self.base.to_dict(), "lo": self.lo, "hi": self.hi,
                "target": self.target.tolist(), "ds": list(self.ds)}

    @classmethod
    def from_dict(cls, d, context=None):
        return cls(region_from_dict(d["base"], context), float(d["lo"]), float(d["hi"]),
                   np.array(d["target"], dtype=float), [float(v) for v in d["ds"]])


@register("carved")
@dataclass(frozen=True, eq=False)
class CarvedRegion(Region):
    """Directions covered by patch ``index`` of a carve cell."""

    cell: CarveCell
    index: int

    def _contains(self, m):
        return self.cell.owner(m, self.index + 1) == self.index

    def bounding_cap(self):
        return self.cell.base.bounding_cap()

    def to_dict(self):
        cid = getattr(self.cell, "cell_id", None)
        if cid is None:
            return {"kind": "carved", "cell": self.cell.to_dict(), "index": self.index}
        return {"kind": "carved", "cell_id": cid, "index": self.index}

    @classmethod
    def from_dict(cls, d, context=None):
        if "cell_id" in d:
            if context is None or d["cell_id"] not in context:
                raise ValueError(f"unresolved carve cell {d['cell_id']!r}")
            return cls(context[d["cell_id"]], int(d["index"]))
        return cls(CarveCell.from_dict(d["cell"], context), int(d["index"]))
