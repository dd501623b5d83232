"""Single-target carving inside a conical cylinder.

Each step picks the focal parameter whose ellipsoid lifts the most still
uncovered directions into the slab without entering the cones removed by
earlier patches, then removes the cones of the new patch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..conics import focal_parameter_through
from ..occlusion import PatchGeometry
from ..reflector import ConicalCylinder, GeneralizedReflector, Patch
from ..sphere.measure import Estimate, region_mass, spherical_measure
from ..sphere.radiance import Uniform
from ..sphere.regions import Region
from ..sphere.sampling import SphericalSampler, sample_in_region
from .cells import CarveCell

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class NoProgress(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}


@dataclass(frozen=True)
class CarveParams:
    d_min: float | None = None
    d_max: float | None = None
    grid_count: int = 64
    refinements: int = 3
    epsilon_rule: float = 0.05
    stop_residual: float = 1e-3
    max_patches: int = 200
    measure_samples: int = 20000
    seed: int = 0
    stall_refinements: int = 3

    def __post_init__(self):
        if not 0 < self.stop_residual < 1:
            raise ValueError("stop_residual must lie in (0, 1)")
        if not 0 <= self.epsilon_rule < 1:
            raise ValueError("epsilon_rule must lie in [0, 1)")
        for name in ("grid_count", "max_patches", "measure_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_min is not None and self.d_max is not None and not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")


@dataclass
class CarveState:
    """Carving progress on one cell, tracked on a fixed sample of the base region."""

    cell: CarveCell
    samples: np.ndarray
    area: float
    uncovered: np.ndarray = None
    k: int = 0
    last_D: float = math.inf
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.uncovered is None:
            self.uncovered = np.ones(len(self.samples), dtype=bool)

    @property
    def residual_fraction(self) -> float:
        return float(self.uncovered.mean()) if len(self.samples) else 0.0

    @property
    def residual(self) -> float:
        return self.area * self.residual_fraction

    def feasible_interval(self, m=None):
        """Per-direction open interval of d that lifts the direction into the slab."""
        m = self.samples[self.uncovered] if m is None else m
        x = self.cell.target
        lo = focal_parameter_through(m * (self.cell.lo / m[:, 2])[:, None], x)
        hi = focal_parameter_through(m * (self.cell.hi / m[:, 2])[:, None], x)
        return lo, hi

    def lift_count(self, d: float, live=None, bounds=None):
        """Number of uncovered samples a patch at ``d`` would cover, and the mask."""
        live = self.samples[self.uncovered] if live is None else live
        lo, hi = self.feasible_interval(live) if bounds is None else bounds
        cand = np.flatnonzero((lo < d) & (d < hi))
        mask = np.zeros(len(live), dtype=bool)
        if cand.size:
            mask[cand] = self.cell.newly_covered(live[cand], d)
        return int(mask.sum()), mask


def profile_Dk(state: CarveState, x, d: float) -> Estimate:
    """Measure of directions whose point on E_d(x) lies in the uncarved region."""
    if d <= 0:
        raise ValueError("d must be positive")
    if not np.array_equal(np.asarray(x, dtype=float), state.cell.target):
        raise ValueError("profile target differs from the cell target")
    n = len(state.samples)
    if n == 0:
        return Estimate(0.0, 0.0, 0)
    cnt, _ = state.lift_count(d)
    p = cnt / n
    return Estimate(state.area * p, state.area * math.sqrt(p * (1 - p) / max(n - 1, 1)), n, cnt)


def region_area(region: Region, seed: int = 0, count: int = 400_000) -> float:
    exact = region_mass(Uniform(1.0), region)
    if exact is not None:
        return exact
    axis, level = region.bounding_cap()
    return spherical_measure(region, SphericalSampler.for_cap(seed, count, axis, level)).mean


def new_state(cell: CarveCell, p: CarveParams, stream: int = 0) -> CarveState:
    samples = sample_in_region(cell.base, p.measure_samples, p.seed, stream=stream)
    if np.any(samples[:, 2] <= 0):
        raise ValueError("base region must lie in the upper hemisphere")
    return CarveState(cell, samples, region_area(cell.base, p.seed))


def _search(state: CarveState, p: CarveParams, count: int):
    """Grid plus golden-section search; returns evaluated (d, count) pairs."""
    live = state.samples[state.uncovered]
    bounds = state.feasible_interval(live)
    d_lo = p.d_min if p.d_min is not None else float(bounds[0].min())
    d_hi = p.d_max if p.d_max is not None else float(bounds[1].max())
    grid = np.geomspace(d_lo, d_hi, count + 2)[1:-1]
    evals = {}

    def f(d):
        d = float(d)
        if d not in evals:
            evals[d] = state.lift_count(d, live, bounds)[0]
        return evals[d]

    vals = [f(d) for d in grid]
    best = int(np.argmax(vals))
    if vals[best] > 0:
        a = grid[best - 1] if best > 0 else d_lo
        b = grid[best + 1] if best + 1 < len(grid) else d_hi
        # golden-section in log d around the best grid cell
        la, lb = math.log(a), math.log(b)
        c, e = lb - GOLDEN * (lb - la), la + GOLDEN * (lb - la)
        fc, fe = f(math.exp(c)), f(math.exp(e))
        for _ in range(p.refinements):
            if fc >= fe:
                lb, e, fe = e, c, fc
                c = lb - GOLDEN * (lb - la)
                fc = f(math.exp(c))
            else:
                la, c, fc = c, e, fe
                e = la + GOLDEN * (lb - la)
                fe = f(math.exp(e))
    return sorted(evals.items())


def carve_step(state: CarveState, p: CarveParams):
    """One carving iteration. Returns the trace row, or None when nothing can be lifted."""
    live_idx = np.flatnonzero(state.uncovered)
    n = len(state.samples)
    count = p.grid_count
    for _ in range(p.stall_refinements + 1):
        evals = _search(state, p, count)
        d_max_all = max(c for _, c in evals)
        if d_max_all > 0:
            break
        count *= 4
    else:
        return None
    allowed = [(d, c) for d, c in evals if c <= state.last_D]
    if not allowed:
        allowed = evals
    best_c = max(c for _, c in allowed)
    d_sel = min(d for d, c in allowed if c == best_c)
    _, mask = state.lift_count(d_sel)
    j = state.cell.add(d_sel)
    state.uncovered[live_idx[mask]] = False
    state.last_D = best_c
    state.k += 1
    row = {"k": j, "d": d_sel, "D": state.area * best_c / n, "D_count": best_c,
           "D_grid_max": state.area * d_max_all / n,
           "greedy_ok": bool(best_c >= (1.0 - p.epsilon_rule) * d_max_all),
           "residual": state.residual, "residual_fraction": state.residual_fraction}
    state.trace.append(row)
    return row


def carve_cell(cell: CarveCell, p: CarveParams, stream: int = 0, state: CarveState | None = None) -> CarveState:
    state = new_state(cell, p, stream) if state is None else state
    while state.residual_fraction > p.stop_residual and len(cell.ds) < p.max_patches:
        row = carve_step(state, p)
        if row is None:
            raise NoProgress(
                f"no admissible focal parameter lifts the remaining {state.residual_fraction:.3g} of the base",
                {"k": state.k, "ds": list(cell.ds), "residual": state.residual,
                 "residual_fraction": state.residual_fraction, "target": cell.target.tolist()})
    return state


def cell_patches(cell: CarveCell, first_priority: int = 0):
    return [Patch(PatchGeometry(e, cell.region(j), check=False), cell.target, first_priority + j)
            for j, e in enumerate(cell.ellipsoids)]


def _g_vanishes(g, region: Region, seed: int) -> bool:
    m = sample_in_region(region, 4096, seed, stream=99)
    return len(m) == 0 or not np.any(g(m) > 0)


def carve_single_target(restriction: ConicalCylinder, x, g, p: CarveParams = CarveParams()) -> GeneralizedReflector:
    x = np.asarray(x, dtype=float).reshape(3)
    if not x[2] < 0:
        raise ValueError("target must lie below the xy-plane")
    cell = CarveCell(restriction.base, restriction.lo, restriction.hi, x)
    cell.cell_id = "c0"
    if _g_vanishes(g, restriction.base, p.seed):
        return GeneralizedReflector([], restriction.base, restriction, 0.0,
                                    {"cells": [cell], "trace": [], "residual_fraction": 0.0})
    state = carve_cell(cell, p)
    trace = [dict(row, cell=0) for row in state.trace]
    return GeneralizedReflector(cell_patches(cell), restriction.base, restriction, state.residual_fraction,
                                {"cells": [cell], "trace": trace, "residual_fraction": state.residual_fraction,
                                 "capped": len(cell.ds) >= p.max_patches and state.residual_fraction > p.stop_residual})


def projection_identity_check(cell: CarveCell, k: int, m, n_heights: int = 64) -> dict:
    """Compare two descriptions of the still-free directions after ``k`` patches.

    One side: directions in the base not covered by patches 0..k-1. Other
    side: directions whose ray from the origin has a point in the slab that
    is outside every removed cone, tested on ``n_heights`` heights per ray.
    """
    m = np.atleast_2d(m)
    left = cell.base.contains(m) & (cell.owner(m, k) < 0)
    right = np.zeros(len(m), dtype=bool)
    cand = np.flatnonzero(left | cell.base.contains(m))
    if cand.size:
        mm = m[cand]
        zs = cell.lo + (cell.hi - cell.lo) * (np.arange(n_heights) + 0.5) / n_heights
        free_any = np.zeros(len(mm), dtype=bool)
        not_owned = cell.owner(mm, k) < 0
        for z in zs:
            q = mm * (z / mm[:, 2])[:, None]
            u = q - cell.target
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            free_any |= cell.ray_owner(u, k) < 0
        right[cand] = not_owned & free_any
    disagree = int(np.count_nonzero(left != right))
    return {"disagree": disagree, "fraction": disagree / max(len(m), 1), "left": int(left.sum()),
            "right": int(right.sum())}
