"""Forward ray-trace verification of reflector designs.

The tracer reflects each emitted ray with the surface normal and attributes it
to whichever target its reflected line passes closest to. It never uses the
focal parameter or the known focus to decide where light goes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conics import reflect_direction, surface_normal
from .occlusion import Cone, cone_contains, mutual_clear
from .reflector import (
    BLOCKED,
    TARGET,
    UNDEFINED,
    GeneralizedReflector,
    InterpolatedReflector,
    TargetPrescription,
    _connected,
    _dirs,
    _grid,
    interpolate,
    tally_energy,
)
from .sphere.measure import Estimate
from .sphere.sampling import SphericalSampler, chunked_map

ATTRIBUTION_RTOL = 1e-6
MIN_SPACING_RATIO = 1e3
LOST = UNDEFINED


@dataclass(frozen=True)
class TraceOutcome:
    m: np.ndarray
    patch: int | None
    point: np.ndarray | None
    y: np.ndarray | None
    result: str
    target: int | None = None
    miss_distance: float | None = None
    block_point: np.ndarray | None = None
    blocker: int | None = None


@dataclass
class TraceBatch:
    patch: np.ndarray
    point: np.ndarray
    y: np.ndarray
    kind: np.ndarray
    target: np.ndarray
    miss: np.ndarray
    block_point: np.ndarray
    blocker: np.ndarray


def _base(r):
    return r.base if isinstance(r, InterpolatedReflector) else r


def check_target_spacing(targets):
    """Targets must sit much farther apart than the attribution tolerance."""
    t = np.atleast_2d(targets)
    if len(t) < 2:
        return math.inf
    dist = np.linalg.norm(t[:, None] - t[None], axis=2)
    spacing = dist[np.triu_indices(len(t), 1)].min()
    ratio = spacing / (ATTRIBUTION_RTOL * np.linalg.norm(t, axis=1).max())
    if not ratio > MIN_SPACING_RATIO:
        raise ValueError(f"target spacing is only {ratio:.3g} attribution tolerances")
    return ratio


def attribute(p, y, targets):
    """Nearest target ahead of each reflected line and its distance from that line."""
    best = np.full(len(p), -1, dtype=np.int64)
    dist = np.full(len(p), np.inf)
    for i, x in enumerate(targets):
        v = x - p
        s = np.einsum("ij,ij->i", v, y)
        dd = np.linalg.norm(v - s[:, None] * y, axis=1)
        dd = np.where(s > 0, dd, np.inf)
        better = dd < dist
        dist[better] = dd[better]
        best[better] = i
    return best, dist


def trace_batch(r, m) -> TraceBatch:
    base = _base(r)
    m = np.atleast_2d(np.asarray(m, dtype=float))
    n = len(m)
    ids = base.select(m)
    point = np.full((n, 3), np.nan)
    y = np.full((n, 3), np.nan)
    kind = np.full(n, LOST, dtype=np.int8)
    tgt = np.full(n, -1, dtype=np.int64)
    miss = np.full(n, np.nan)
    bpt = np.full((n, 3), np.nan)
    bid = np.full(n, -1, dtype=np.int64)
    for j in np.unique(ids[ids >= 0]):
        sel = np.flatnonzero(ids == j)
        e = base.patches[j].ellipsoid
        mm = m[sel]
        point[sel] = mm * e.radius(mm)[:, None]
        y[sel] = reflect_direction(mm, surface_normal(e, mm))
    have = np.flatnonzero(ids >= 0)
    if have.size and len(base.targets):
        best, dist = attribute(point[have], y[have], base.targets)
        tol = ATTRIBUTION_RTOL * np.linalg.norm(base.targets, axis=1)
        ok = (best >= 0) & (dist <= tol[np.maximum(best, 0)])
        hv = have[ok]
        tgt[hv] = best[ok]
        miss[hv] = dist[ok]
        if hv.size:
            extra = r.wall_hits if isinstance(r, InterpolatedReflector) else None
            hit, blk = base.first_block(point[hv], base.targets[tgt[hv]], own=ids[hv], extra=extra)
            blocked = blk >= 0
            kind[hv] = np.where(blocked, BLOCKED, TARGET)
            bpt[hv[blocked]] = hit[blocked]
            bid[hv[blocked]] = blk[blocked]
    return TraceBatch(ids, point, y, kind, tgt, miss, bpt, bid)


def trace(r, m) -> TraceOutcome:
    """Trace one direction; ``result`` is "target", "blocked" or "lost"."""
    m = np.asarray(m, dtype=float).reshape(3)
    b = trace_batch(r, m[None])
    pid = int(b.patch[0])
    res = {TARGET: "target", BLOCKED: "blocked", LOST: "lost"}[int(b.kind[0])]
    return TraceOutcome(
        m, None if pid < 0 else pid,
        None if pid < 0 else b.point[0], None if pid < 0 else b.y[0], res,
        None if b.target[0] < 0 else int(b.target[0]),
        None if not np.isfinite(b.miss[0]) else float(b.miss[0]),
        b.block_point[0] if res == "blocked" else None,
        int(b.blocker[0]) if res == "blocked" else None)


@dataclass
class EnergyReport:
    targets: list
    blocked_energy: float
    blocked_se: float
    lost_energy: float
    total_energy: float
    samples: int
    seed: int
    passed: bool
    blocked_count: int = 0
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {"targets": self.targets, "blocked_energy": self.blocked_energy, "blocked_se": self.blocked_se,
                "lost_energy": self.lost_energy, "total_energy": self.total_energy, "samples": self.samples,
                "seed": self.seed, "pass": self.passed, "blocked_count": self.blocked_count, "notes": self.notes}


def trace_tally(r, g, s: SphericalSampler, threads=None):
    base = _base(r)
    return tally_energy(lambda m: (lambda b: (b.kind, b.target))(trace_batch(r, m)), len(base.targets), g, s, threads)


def _blocked_count(r, s, threads):
    return sum(chunked_map(lambda c: int(np.count_nonzero(trace_batch(r, s.chunk(c)).kind == BLOCKED)),
                           s.n_chunks, threads))


def energy_report(r, g, F: TargetPrescription, N: int, seed: int, threads=None) -> EnergyReport:
    if N < 10_000:
        raise ValueError("need at least 1e4 samples")
    base = _base(r)
    check_target_spacing(base.targets)
    check_target_spacing(F.points)
    s = SphericalSampler(seed, N)
    tally = trace_tally(r, g, s, threads)
    mu = tally.total.mean
    f_served = F.energy_for(base.targets)
    rows, ok = [], True
    for i, est in enumerate(tally.per_target):
        delta = est.mean - f_served[i]
        good = abs(delta) <= max(0.01 * f_served[i], 3.0 * est.se)
        ok &= good
        rows.append({"point": base.targets[i].tolist(), "estimate": est.mean, "se": est.se,
                     "prescribed": float(f_served[i]), "delta": float(delta), "pass": bool(good)})
    # prescribed targets that no patch serves receive nothing
    served = np.zeros(len(F.points), dtype=bool)
    for i, p in enumerate(F.points):
        served[i] = len(base.targets) > 0 and np.min(np.linalg.norm(base.targets - p, axis=1)) <= 1e-9 * max(1.0, np.linalg.norm(p))
    for i in np.flatnonzero(~served):
        good = F.energies[i] == 0.0
        ok &= good
        rows.append({"point": F.points[i].tolist(), "estimate": 0.0, "se": 0.0, "prescribed": float(F.energies[i]),
                     "delta": float(-F.energies[i]), "pass": bool(good)})
    ok &= tally.blocked.mean <= 1e-3 * mu
    return EnergyReport(rows, tally.blocked.mean, tally.blocked.se, tally.lost.mean, mu, N, seed, bool(ok),
                        notes={"attribution_rtol": ATTRIBUTION_RTOL})


def _wall_points(ir: InterpolatedReflector, per_tri=4, seed=0):
    if len(ir.walls) == 0:
        return np.empty((0, 3)), np.empty((0, 2), dtype=np.int64)
    rng = np.random.default_rng(seed)
    a = rng.random((len(ir.walls), per_tri, 2))
    flip = a.sum(axis=2) > 1
    a[flip] = 1 - a[flip]
    # stay off triangle edges, whose points are shared with the patches
    a = 0.05 + 0.9 * a
    w0, w1, w2 = ir.walls[:, 0], ir.walls[:, 1], ir.walls[:, 2]
    pts = w0[:, None] + a[..., :1] * (w1 - w0)[:, None] + a[..., 1:] * (w2 - w0)[:, None]
    return pts.reshape(-1, 3), np.repeat(ir.wall_pairs, per_tri, axis=0)


def check_interpolation_condition(r1: GeneralizedReflector, resolution=96, n_occ=2048, seed=0) -> dict:
    """Sampled sufficient check that interpolating walls cannot shadow any chord.

    (a) no patch intrudes into another patch's chord cone; (b) no patch or
    wall point lies inside the chord cone of a patch other than its own; (c)
    the covered aperture grid is connected and every patch-to-patch label
    change carries a wall.
    """
    ev = {"kind": "desk-scale sufficient check", "n_occ": n_occ, "resolution": resolution}
    if not r1.patches:
        ev.update(a=True, b=True, c=True)
        return {"holds": True, "evidence": ev}
    items = [(p.geometry, p.target) for p in r1.patches]
    a, pair = mutual_clear(items, n_occ, seed)
    ev["a"] = a
    ev["a_pair"] = pair
    ir = interpolate(r1, resolution)
    wpts, wpairs = _wall_points(ir, seed=seed)
    b_fail = []
    for i, p in enumerate(r1.patches):
        cone = Cone(p.target, p.geometry)
        if len(wpts):
            inside = cone_contains(cone, wpts)
            if inside.any():
                b_fail.append({"cone": i, "wall_point": wpts[np.flatnonzero(inside)[0]].tolist()})
    ev["b"] = not b_fail and a
    ev["b_failures"] = b_fail[:10]
    axis, th, ph = _grid(r1, resolution)
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = _dirs(axis, T, P).reshape(-1, 3)
    lab = r1.select(dirs).reshape(T.shape)
    inap = r1.aperture.contains(dirs).reshape(T.shape)
    connected = _connected(inap) and _connected(lab >= 0)
    ev["aperture_connected"] = bool(_connected(inap))
    ev["cover_connected"] = bool(_connected(lab >= 0))
    ev["walls"] = int(len(ir.walls))
    change = 0
    for i in range(lab.shape[0]):
        for j in range(lab.shape[1]):
            for i1, j1 in ((i, (j + 1) % lab.shape[1]), (i + 1, j)):
                if i1 < lab.shape[0] and lab[i, j] != lab[i1, j1] and lab[i, j] >= 0 and lab[i1, j1] >= 0:
                    change += 1
    ev["label_changes"] = change
    ev["walls_present"] = change == 0 or len(ir.walls) > 0
    ev["c"] = bool(connected and ev["walls_present"])
    holds = bool(ev["a"] and ev["b"] and ev["c"])
    return {"holds": holds, "evidence": ev, "interpolated": ir}


def g2_equals_g1_check(r1: GeneralizedReflector, g, N: int, seed: int, threads=None, resolution=96,
                       diagnostic=False, ir=None) -> dict:
    cond = None
    if not diagnostic:
        cond = check_interpolation_condition(r1, resolution)
        if not cond["holds"]:
            raise ValueError("interpolation condition does not hold; rerun with diagnostic=True")
        ir = cond["interpolated"]
    elif ir is None:
        ir = interpolate(r1, resolution)
    s = SphericalSampler(seed, N)
    t1 = trace_tally(r1, g, s, threads)
    t2 = trace_tally(ir, g, s, threads)
    rows, ok = [], True
    for i, (e1, e2) in enumerate(zip(t1.per_target, t2.per_target)):
        se = math.hypot(e1.se, e2.se)
        diff = e2.mean - e1.mean
        good = abs(diff) <= 3.0 * se
        ok &= good
        rows.append({"point": r1.targets[i].tolist(), "G1": e1.mean, "G2": e2.mean, "se": se,
                     "diff": diff, "pass": bool(good)})
    return {"pass": bool(ok), "targets": rows, "walls": int(len(ir.walls)), "samples": N, "seed": seed}
