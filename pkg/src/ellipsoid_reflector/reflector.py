"""Generalized and interpolated reflectors: selection, reflector maps and energies.

A generalized reflector is a priority-ordered list of ellipsoid patches. The
radial selector picks, for each direction, the lowest-rank patch whose region
contains it; the reflector map sends the direction to that patch's target
unless the chord from the reflection point to the target hits another part of
the reflector first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conics import Ellipsoid, ray_hits
from .occlusion import PatchGeometry, ellipsoid_from_dict, ellipsoid_to_dict
from .sphere.measure import Estimate, project
from .sphere.regions import Cap, Region, region_from_dict
from .sphere.sampling import SphericalSampler, chunked_map

# chords are tested for hits strictly inside (SEG_TOL, 1 - SEG_TOL) of their length
SEG_TOL = 1e-9

TARGET, BLOCKED, UNDEFINED = 0, 1, 2


class DisconnectedAperture(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConicalCylinder:
    """Open set {p : Proj(p) in base, z' < p_z < z' + delta}."""

    base: Region
    z_prime: float
    delta: float

    def __post_init__(self):
        if self.z_prime <= 0 or self.delta <= 0:
            raise ValueError("z' and delta must be positive")

    @property
    def lo(self):
        return self.z_prime

    @property
    def hi(self):
        return self.z_prime + self.delta

    def contains(self, p):
        p = np.atleast_2d(p)
        inside = (p[:, 2] > self.lo) & (p[:, 2] < self.hi)
        if inside.any():
            idx = np.flatnonzero(inside)
            inside[idx] = self.base.contains(project(p[idx]))
        return inside

    def height_excess(self, p):
        """How far each point sits outside the slab heights (0 inside)."""
        z = np.atleast_2d(p)[:, 2]
        return np.maximum(np.maximum(self.lo - z, z - self.hi), 0.0)

    def to_dict(self):
        return {"kind": "conical-cylinder", "base": self.base.to_dict(),
                "z_prime": self.z_prime, "delta": self.delta}

    @classmethod
    def from_dict(cls, d, context=None):
        return cls(region_from_dict(d["base"], context), float(d["z_prime"]), float(d["delta"]))


@dataclass(frozen=True, eq=False)
class Patch:
    geometry: PatchGeometry
    target: np.ndarray
    priority: int

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(3))

    @property
    def ellipsoid(self) -> Ellipsoid:
        return self.geometry.ellipsoid

    @property
    def region(self) -> Region:
        return self.geometry.region

    @property
    def d(self) -> float:
        return self.geometry.ellipsoid.d

    def to_dict(self):
        return {"ellipsoid": ellipsoid_to_dict(self.ellipsoid), "region": self.region.to_dict(),
                "target": self.target.tolist(), "priority": self.priority}

    @classmethod
    def from_dict(cls, d, context=None):
        geo = PatchGeometry(ellipsoid_from_dict(d["ellipsoid"]), region_from_dict(d["region"], context), check=False)
        return cls(geo, np.array(d["target"], dtype=float), int(d["priority"]))


@dataclass(frozen=True, eq=False)
class TargetPrescription:
    points: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        f = np.asarray(self.energies, dtype=float).reshape(-1)
        if len(pts) != len(f):
            raise ValueError("one energy per target point")
        if np.any(f < 0):
            raise ValueError("energies must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "energies", f)

    @property
    def total(self):
        return float(self.energies.sum())

    def conserves(self, mass: float, rel=1e-6) -> bool:
        return abs(self.total - mass) <= rel * max(abs(mass), 1e-300)

    def energy_for(self, points, tol=1e-9):
        """Prescribed energy matched to each of ``points`` (0 when absent)."""
        points = np.atleast_2d(points)
        out = np.zeros(len(points))
        for i, p in enumerate(points):
            if len(self.points) == 0:
                break
            dist = np.linalg.norm(self.points - p, axis=1)
            j = int(np.argmin(dist))
            if dist[j] <= tol * max(1.0, np.linalg.norm(p)):
                out[i] = self.energies[j]
        return out

    def to_dict(self):
        return {"points": self.points.tolist(), "energies": self.energies.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["points"], dtype=float).reshape(-1, 3), np.array(d["energies"], dtype=float))


def _box_hit(lo, hi, o, u, length):
    """Mask of segments o + t u, 0 <= t <= length, that meet the box [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / u
        t1 = (lo - o) * inv
        t2 = (hi - o) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=1)
    return (tmax >= np.maximum(tmin, 0.0)) & (tmin <= length)


def _ellipsoid_box(e: Ellipsoid):
    # axis-aligned box of the spheroid centred at x/2 with semi-axes (a along k, b across)
    c = 0.5 * e.x
    a, b = e.semi_major, e.semi_minor
    k = e.k
    half = np.sqrt((a * k) ** 2 + (b ** 2) * (1.0 - k ** 2))
    return c - half, c + half


@dataclass(eq=False)
class GeneralizedReflector:
    patches: list
    aperture: Region
    restriction: ConicalCylinder | None = None
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.patches = sorted(self.patches, key=lambda p: p.priority)
        pr = [p.priority for p in self.patches]
        if len(set(pr)) != len(pr):
            raise ValueError("patch priorities must be unique")
        targets = []
        self._target_index = []
        for p in self.patches:
            for i, t in enumerate(targets):
                if np.array_equal(t, p.target):
                    self._target_index.append(i)
                    break
            else:
                targets.append(p.target)
                self._target_index.append(len(targets) - 1)
        self.targets = np.array(targets).reshape(-1, 3)
        self._target_index = np.array(self._target_index, dtype=np.int64)
        self._boxes = []
        for p in self.patches:
            lo, hi = _ellipsoid_box(p.ellipsoid)
            cell = getattr(p.region, "cell", None)
            if cell is not None:
                lo[2], hi[2] = max(lo[2], cell.lo), min(hi[2], cell.hi)
            pad = 1e-9 * (1.0 + np.abs(hi - lo).max())
            self._boxes.append((lo - pad, hi + pad))

    def patch_target_index(self, ids):
        ids = np.asarray(ids)
        out = np.full(ids.shape, -1, dtype=np.int64)
        ok = ids >= 0
        out[ok] = self._target_index[ids[ok]]
        return out

    def select(self, m):
        """Index of the selected patch per direction, -1 where undefined."""
        m = np.atleast_2d(np.asarray(m, dtype=float))
        out = np.full(len(m), -1, dtype=np.int64)
        owners = {}
        for idx, p in enumerate(self.patches):
            live = np.flatnonzero(out < 0)
            if live.size == 0:
                break
            cell = getattr(p.region, "cell", None)
            if cell is not None:
                # carved regions of one cell are disjoint: resolve the owner once
                key = id(cell)
                if key not in owners:
                    owners[key] = cell.owner(m)
                hit = owners[key][live] == p.region.index
            else:
                hit = p.region.contains(m[live])
            out[live[hit]] = idx
        return out

    def rho(self, m):
        """(radius, patch index); radius NaN where undefined."""
        m = np.atleast_2d(np.asarray(m, dtype=float))
        ids = self.select(m)
        r = np.full(len(m), np.nan)
        for j in np.unique(ids[ids >= 0]):
            sel = ids == j
            r[sel] = self.patches[j].ellipsoid.radius(m[sel])
        return r, ids

    def points(self, m, ids=None):
        m = np.atleast_2d(np.asarray(m, dtype=float))
        if ids is None:
            ids = self.select(m)
        p = np.full((len(m), 3), np.nan)
        for j in np.unique(ids[ids >= 0]):
            sel = ids == j
            p[sel] = self.patches[j].ellipsoid.point(m[sel])
        return p

    def first_block(self, origins, ends, own=None, extra=None):
        """First obstruction strictly inside each segment origin -> end.

        Returns (hit point (N, 3) NaN if clear, blocker id (N,) -1 if clear).
        Patch ids are reflector indices; ``extra`` may add further obstacles
        (walls) and reports its ids offset by the patch count.
        """
        o = np.atleast_2d(origins)
        v = np.atleast_2d(ends) - o
        length = np.linalg.norm(v, axis=1)
        u = v / length[:, None]
        best_t = np.full(len(o), np.inf)
        best_id = np.full(len(o), -1, dtype=np.int64)
        for j, p in enumerate(self.patches):
            lo, hi = self._boxes[j]
            cand = np.flatnonzero(_box_hit(lo, hi, o, u, length))
            if cand.size == 0:
                continue
            ts = ray_hits(p.ellipsoid, o[cand], u[cand])
            for col in range(2):
                t = ts[:, col]
                L = length[cand]
                ok = np.isfinite(t) & (t > SEG_TOL * L) & (t < (1.0 - SEG_TOL) * L) & (t < best_t[cand])
                if not ok.any():
                    continue
                ci = cand[ok]
                h = o[ci] + t[ok, None] * u[ci]
                on = self.select(project(h)) == j
                if own is not None:
                    on &= np.asarray(own)[ci] != j
                ci = ci[on]
                best_t[ci] = t[ok][on]
                best_id[ci] = j
        if extra is not None:
            t_w, id_w = extra(o, u, length)
            better = t_w < best_t
            best_t[better] = t_w[better]
            best_id[better] = id_w[better] + len(self.patches)
        hit = np.full((len(o), 3), np.nan)
        ok = np.isfinite(best_t)
        hit[ok] = o[ok] + best_t[ok, None] * u[ok]
        return hit, best_id

    def alpha1(self, m, obstacles=None):
        """Reflector map by patch bookkeeping.

        Returns (kind, target index, blocking point, patch index) with kind in
        TARGET / BLOCKED / UNDEFINED.
        """
        m = np.atleast_2d(np.asarray(m, dtype=float))
        ids = self.select(m)
        kind = np.full(len(m), UNDEFINED, dtype=np.int8)
        tgt = self.patch_target_index(ids)
        block = np.full((len(m), 3), np.nan)
        have = np.flatnonzero(ids >= 0)
        if have.size:
            p = self.points(m[have], ids[have])
            hit, _ = self.first_block(p, self.targets[tgt[have]], own=ids[have], extra=obstacles)
            blocked = np.isfinite(hit[:, 0])
            kind[have] = np.where(blocked, BLOCKED, TARGET)
            block[have[blocked]] = hit[blocked]
        return kind, tgt, block, ids

    def contains_points(self, pts, tol=1e-9):
        if self.restriction is None:
            return np.ones(len(pts), dtype=bool)
        return self.restriction.height_excess(pts) <= tol

    def energy_G1(self, g, omega, s: SphericalSampler, threads=None, obstacles=None):
        """G(omega) plus blocked and lost energy tallies on one sample stream."""
        return tally_energy(lambda m: self.alpha1(m, obstacles)[:2], len(self.targets), g, s, threads, omega)

    def is_weak_solution(self, g, F: TargetPrescription, tol: float, s: SphericalSampler, threads=None):
        if tol <= 0:
            raise ValueError("tol must be positive")
        res = self.energy_G1(g, None, s, threads)
        mu = res.total.mean
        f = F.energy_for(self.targets)
        ntar = max(len(F.points), 1)
        deltas, ok = [], True
        for i, est in enumerate(res.per_target):
            delta = est.mean - f[i]
            deltas.append(delta)
            ok &= abs(delta) <= tol * max(f[i], mu / ntar) + 3.0 * est.se
        # prescribed targets the reflector never serves
        served = F.energy_for(self.targets).sum()
        missing = F.total - served
        ok &= abs(missing) <= tol * max(mu, 1e-300)
        ok &= res.blocked.mean <= tol * mu
        return {"pass": bool(ok), "deltas": deltas, "blocked": res.blocked.mean, "lost": res.lost.mean}

    def interpolate(self, resolution: int = 128):
        return interpolate(self, resolution)

    def to_dict(self):
        return {"patches": [p.to_dict() for p in self.patches], "aperture": self.aperture.to_dict(),
                "restriction": None if self.restriction is None else self.restriction.to_dict(),
                "residual": self.residual}

    @classmethod
    def from_dict(cls, d, context=None):
        res = d.get("restriction")
        return cls([Patch.from_dict(p, context) for p in d["patches"]], region_from_dict(d["aperture"], context),
                   None if res is None else ConicalCylinder.from_dict(res, context), float(d.get("residual", 0.0)))


@dataclass(frozen=True)
class EnergyTally:
    per_target: list
    blocked: Estimate
    lost: Estimate
    total: Estimate
    omega: Estimate


def tally_energy(classify, n_targets, g, s: SphericalSampler, threads=None, omega=None):
    """Split mu_g over the sampler into per-target, blocked and lost parts.

    ``classify(m)`` returns (kind, target index). Sums run in chunk order so
    the result is independent of the thread count.
    """
    omega = None if omega is None else sorted(set(int(i) for i in omega))
    nb = n_targets + 2

    def work(c):
        m = s.chunk(c)
        w = g(m)
        kind, tgt = classify(m)
        lab = np.where(kind == TARGET, tgt, np.where(kind == BLOCKED, n_targets, n_targets + 1))
        s1 = np.bincount(lab, weights=w, minlength=nb)
        s2 = np.bincount(lab, weights=w * w, minlength=nb)
        tot = float(w.sum()), float((w * w).sum())
        om = np.isin(lab, omega) if omega else np.zeros(len(m), dtype=bool)
        wo = np.where(om, w, 0.0)
        return s1, s2, tot, (float(wo.sum()), float((wo * wo).sum()))

    parts = chunked_map(work, s.n_chunks, threads)
    s1 = np.zeros(nb)
    s2 = np.zeros(nb)
    t1 = t2 = o1 = o2 = 0.0
    for a, b, (x1, x2), (y1, y2) in parts:
        s1 += a
        s2 += b
        t1 += x1
        t2 += x2
        o1 += y1
        o2 += y2
    n = s.count

    def est(a, b):
        mean = a / n
        var = max(b / n - mean * mean, 0.0)
        se = math.sqrt(var / (n - 1)) if n > 1 else math.inf
        return Estimate(float(s.area * mean), float(s.area * se), n)

    per = [est(s1[i], s2[i]) for i in range(n_targets)]
    return EnergyTally(per, est(s1[n_targets], s2[n_targets]), est(s1[n_targets + 1], s2[n_targets + 1]),
                       est(t1, t2), est(o1, o2))


def energy_G1(r: GeneralizedReflector, g, omega, s: SphericalSampler, threads=None) -> EnergyTally:
    return r.energy_G1(g, omega, s, threads)


def rho(r: GeneralizedReflector, m):
    rad, ids = r.rho(m)
    return (rad, ids) if np.ndim(m) > 1 else (None if ids[0] < 0 else (float(rad[0]), int(ids[0])))


def alpha1(r: GeneralizedReflector, m):
    return r.alpha1(m)


# --- interpolation ---------------------------------------------------------

@dataclass(eq=False)
class InterpolatedReflector:
    """Patches of a generalized reflector plus radial walls joining them.

    ``walls`` is a (T, 3, 3) triangle array; ``wall_pairs`` records the two
    patch indices each triangle separates. ``boundary`` holds the boundary
    directions with the two radii spanned there.
    """

    base: GeneralizedReflector
    walls: np.ndarray
    wall_pairs: np.ndarray
    boundary: dict = field(default_factory=dict)
    resolution: int = 0

    def __post_init__(self):
        self.walls = np.asarray(self.walls, dtype=float).reshape(-1, 3, 3)
        self.wall_pairs = np.asarray(self.wall_pairs, dtype=np.int64).reshape(-1, 2)
        self._blocks = []
        step = 64
        for s in range(0, len(self.walls), step):
            tri = self.walls[s:s + step]
            flat = tri.reshape(-1, 3)
            pad = 1e-9 * (1.0 + np.ptp(flat, axis=0).max())
            self._blocks.append((s, min(s + step, len(self.walls)), flat.min(0) - pad, flat.max(0) + pad))

    @property
    def patches(self):
        return self.base.patches

    @property
    def targets(self):
        return self.base.targets

    def wall_hits(self, o, u, length):
        """Nearest wall hit strictly inside each segment: (t, triangle id)."""
        best_t = np.full(len(o), np.inf)
        best_id = np.full(len(o), -1, dtype=np.int64)
        for s0, s1, lo, hi in self._blocks:
            cand = np.flatnonzero(_box_hit(lo, hi, o, u, length))
            if cand.size == 0:
                continue
            for j in range(s0, s1):
                t = _segment_triangle(o[cand], u[cand], self.walls[j])
                L = length[cand]
                ok = (t > SEG_TOL * L) & (t < (1.0 - SEG_TOL) * L) & (t < best_t[cand])
                if ok.any():
                    best_t[cand[ok]] = t[ok]
                    best_id[cand[ok]] = j
        return best_t, best_id

    def alpha2(self, m):
        return self.base.alpha1(m, obstacles=self.wall_hits)

    def energy_G2(self, g, omega, s: SphericalSampler, threads=None):
        return self.base.energy_G1(g, omega, s, threads, obstacles=self.wall_hits)

    def to_dict(self):
        return {"walls": self.walls.tolist(), "wall_pairs": self.wall_pairs.tolist(), "resolution": self.resolution}


def energy_G2(ir: InterpolatedReflector, g, omega, s, threads=None) -> EnergyTally:
    return ir.energy_G2(g, omega, s, threads)


def _segment_triangle(o, u, tri, eps=1e-14):
    """Moller-Trumbore ray parameter for each ray against one triangle (inf on miss)."""
    a, b, c = tri
    e1, e2 = b - a, c - a
    pv = np.cross(u, e2)
    det = pv @ e1
    t = np.full(len(o), np.inf)
    ok = np.abs(det) > eps * (np.linalg.norm(e1) * np.linalg.norm(e2) + 1e-300)
    if not ok.any():
        return t
    inv = 1.0 / det[ok]
    tv = o[ok] - a
    uu = np.einsum("ij,ij->i", tv, pv[ok]) * inv
    qv = np.cross(tv, e1)
    vv = np.einsum("ij,ij->i", u[ok], qv) * inv
    tt = (qv @ e2) * inv
    hit = (uu >= 0) & (vv >= 0) & (uu + vv <= 1) & (tt > 0)
    idx = np.flatnonzero(ok)
    t[idx[hit]] = tt[hit]
    return t


def _grid(r: GeneralizedReflector, resolution):
    axis, level = r.aperture.bounding_cap()
    axis = np.asarray(axis, dtype=float)
    theta_max = math.acos(max(-1.0, min(1.0, level)))
    nt = max(resolution // 2, 4)
    nphi = max(resolution, 8)
    th = (np.arange(nt) + 0.5) * theta_max / nt
    ph = np.arange(nphi) * 2.0 * math.pi / nphi
    return axis, th, ph


def _dirs(axis, th, ph):
    from .sphere.sampling import directions_from
    th, ph = np.broadcast_arrays(th, ph)
    return directions_from(np.cos(th).ravel(), ph.ravel(), axis).reshape(th.shape + (3,))


def _bisect(r, axis, a, b, la, lb, iters=40):
    """Boundary between labels along the coordinate segment a -> b in (theta, phi)."""
    for _ in range(iters):
        mid = 0.5 * (a + b)
        lm = r.select(_dirs(axis, mid[0], mid[1]).reshape(1, 3))[0]
        if lm == la:
            a = mid
        else:
            b, lb = mid, lm
    return 0.5 * (a + b), la, lb


def _junction(found, th, ph, i, j, dphi):
    """Meeting point of several boundaries inside one grid cell.

    Crossings on constant-theta edges fix the boundary's phi and crossings on
    constant-phi edges fix its theta; combining the two averages is exact for
    boundaries aligned with the grid and first-order accurate otherwise.
    """
    on_h = [c[0] for c, h in found if c is not None and h]
    on_v = [c[0] for c, h in found if c is not None and not h]
    t = np.mean([q[0] for q in on_v]) if on_v else 0.5 * (th[i] + th[i + 1])
    p = np.mean([q[1] if q[1] >= ph[j] - 1e-12 else q[1] + 2.0 * math.pi for q in on_h]) if on_h else ph[j] + 0.5 * dphi
    return np.array([t, p])


def interpolate(r: GeneralizedReflector, resolution: int = 128) -> InterpolatedReflector:
    """Join neighbouring patches by radial walls along their sampled shared boundary."""
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    axis, th, ph = _grid(r, resolution)
    nt, nphi = len(th), len(ph)
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = _dirs(axis, T, P).reshape(-1, 3)
    lab = r.select(dirs).reshape(nt, nphi)
    inap = r.aperture.contains(dirs).reshape(nt, nphi)
    if not _connected(inap):
        raise DisconnectedAperture("aperture grid splits into several components")
    dphi = 2.0 * math.pi / nphi
    crossings = {}

    def edge_point(i, j, horiz):
        key = (i, j, horiz)
        if key in crossings:
            return crossings[key]
        i1, j1 = (i, (j + 1) % nphi) if horiz else (i + 1, j)
        la, lb = lab[i, j], lab[i1, j1]
        res = None
        if la != lb and la >= 0 and lb >= 0:
            a = np.array([th[i], ph[j]])
            b = np.array([th[i], ph[j] + dphi]) if horiz else np.array([th[i + 1], ph[j]])
            q, l1, l2 = _bisect(r, axis, a, b, la, lb)
            if l2 >= 0:
                res = (q, int(l1), int(l2))
        crossings[key] = res
        return res

    walls, pairs, bnd_dirs, bnd_r = [], [], [], []

    def radial(q, l1, l2):
        m = _dirs(axis, q[0], q[1]).reshape(3)
        r1 = float(r.patches[l1].ellipsoid.radius(m[None])[0])
        r2 = float(r.patches[l2].ellipsoid.radius(m[None])[0])
        bnd_dirs.append(m)
        bnd_r.append((min(r1, r2), max(r1, r2)))
        return m, min(r1, r2), max(r1, r2)

    for i in range(nt - 1):
        for j in range(nphi):
            edges = ((i, j, True), (i + 1, j, True), (i, j, False), (i, (j + 1) % nphi, False))
            found = [(edge_point(*e), e[2]) for e in edges]
            pts = [c for c, _ in found if c is not None]
            if len(pts) < 2:
                continue
            if len(pts) == 2:
                segs = [(pts[0], pts[1])]
            else:
                segs = [(q, (_junction(found, th, ph, i, j, dphi), q[1], q[2])) for q in pts]
            for (q1, a1, b1), (q2, a2, b2) in segs:
                m1, lo1, hi1 = radial(q1, a1, b1)
                m2, lo2, hi2 = radial(q2, a2, b2)
                quad = [m1 * lo1, m1 * hi1, m2 * hi2, m2 * lo2]
                walls.append([quad[0], quad[1], quad[2]])
                walls.append([quad[0], quad[2], quad[3]])
                pr = sorted((int(a1), int(b1)))
                pairs += [pr, pr]
    return InterpolatedReflector(r, np.array(walls).reshape(-1, 3, 3), np.array(pairs).reshape(-1, 2),
                                 {"directions": np.array(bnd_dirs).reshape(-1, 3),
                                  "radii": np.array(bnd_r).reshape(-1, 2)}, resolution)


def _connected(mask):
    """4-connectivity on a (theta, phi) grid, periodic in phi, rows 0 joined through the pole."""
    from scipy import ndimage

    if not mask.any():
        return True
    lab, n = ndimage.label(mask)
    if n <= 1:
        return True
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def join(a, b):
        if a and b:
            parent[find(a)] = find(b)

    for i in range(mask.shape[0]):
        join(lab[i, 0], lab[i, -1])
    first = [v for v in lab[0] if v]
    for v in first[1:]:
        join(first[0], v)
    return len({find(v) for v in range(1, n + 1)}) == 1


def grid_components(mask):
    return _connected(mask)
