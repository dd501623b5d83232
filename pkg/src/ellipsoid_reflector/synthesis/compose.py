"""Multi-target composition and the rotationally symmetric designer."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..reflector import ConicalCylinder, GeneralizedReflector, TargetPrescription
from ..sphere.measure import cap_level_for_mass, radiance_integral, region_mass
from ..sphere.regions import Band, Cap, Intersection, Region, Wedge, ZHAT
from ..sphere.sampling import SphericalSampler, sample_in_region
from .carve import CarveParams, carve_cell, cell_patches, _g_vanishes
from .cells import CarveCell

ENERGY_RTOL = 1e-6


class HypothesisViolated(RuntimeError):
    def __init__(self, i, j, witness):
        super().__init__(f"chords of cell {j} toward its target cross cell {i} at {np.round(witness, 6).tolist()}")
        self.i, self.j, self.witness = i, j, np.asarray(witness)


class EnergyMismatch(ValueError):
    def __init__(self, i, mass, f):
        super().__init__(f"cell {i}: radiance mass {mass:.12g} differs from prescribed energy {f:.12g}")
        self.i, self.mass, self.f = i, mass, f


@dataclass(frozen=True, eq=False)
class CellSpec:
    region: Region
    a: float
    b: float
    target: np.ndarray
    energy: float

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).reshape(3))
        if self.b <= 0:
            raise ValueError("cell thickness must be positive")

    def contains(self, p):
        p = np.atleast_2d(p)
        inside = (p[:, 2] > self.a) & (p[:, 2] < self.a + self.b)
        idx = np.flatnonzero(inside)
        if idx.size:
            inside[idx] = self.region.contains(p[idx] / np.linalg.norm(p[idx], axis=1, keepdims=True))
        return inside

    def sample_points(self, n, seed, stream=0):
        m = sample_in_region(self.region, n, seed, stream)
        rng = np.random.default_rng([seed, stream, 7])
        z = self.a + self.b * rng.random(len(m))
        return m * (z / m[:, 2])[:, None]


def cell_mass(g, region: Region, seed=0, count=1_000_000):
    """mu_g of a cell region: quadrature when possible, Monte Carlo otherwise.

    Returns (mass, tolerance) where the tolerance is the absolute slack the
    comparison should allow.
    """
    exact = region_mass(g, region)
    if exact is not None:
        return exact, ENERGY_RTOL * max(exact, 1e-300)
    axis, level = region.bounding_cap()
    est = radiance_integral(g, region, SphericalSampler.for_cap(seed, count, axis, level))
    return est.mean, max(ENERGY_RTOL * est.mean, 3.0 * est.se)


def check_hypothesis(cells, n_points=4096, n_steps=16, seed=0):
    """First (i, j, witness) with a chord from cell j to its target passing through cell i."""
    for j, cj in enumerate(cells):
        q = cj.sample_points(n_points, seed, stream=j)
        if len(q) == 0:
            continue
        v = cj.target - q
        for i, ci in enumerate(cells):
            if i == j:
                continue
            # only the part of each chord at cell i's heights can meet it
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = (ci.a - q[:, 2]) / v[:, 2]
                t1 = (ci.a + ci.b - q[:, 2]) / v[:, 2]
            lo = np.clip(np.minimum(t0, t1), 0.0, 1.0)
            hi = np.clip(np.maximum(t0, t1), 0.0, 1.0)
            ok = np.isfinite(lo) & np.isfinite(hi) & (hi > lo)
            if not ok.any():
                continue
            qs, vs, l, h = q[ok], v[ok], lo[ok], hi[ok]
            for s in (np.arange(n_steps) + 0.5) / n_steps:
                c = qs + (l + s * (h - l))[:, None] * vs
                inside = ci.contains(c)
                if inside.any():
                    raise HypothesisViolated(i, j, c[np.flatnonzero(inside)[0]])
    return True


def compose_multi_target(cells, restriction: ConicalCylinder, g, p: CarveParams = CarveParams(),
                         check_energy=True) -> GeneralizedReflector:
    cells = list(cells)
    for i, c in enumerate(cells):
        if c.a < restriction.lo - 1e-12 or c.a + c.b > restriction.hi + 1e-12:
            raise ValueError(f"cell {i} slab leaves the restriction")
        if check_energy:
            mass, tol = cell_mass(g, c.region, p.seed)
            if abs(mass - c.energy) > tol:
                raise EnergyMismatch(i, mass, c.energy)
    check_hypothesis(cells, seed=p.seed)
    patches, trace, carve_cells, worst = [], [], [], 0.0
    for i, c in enumerate(cells):
        cell = CarveCell(c.region, c.a, c.a + c.b, c.target)
        cell.cell_id = f"c{i}"
        carve_cells.append(cell)
        if _g_vanishes(g, c.region, p.seed):
            continue
        state = carve_cell(cell, p, stream=i)
        patches += cell_patches(cell, len(patches))
        trace += [dict(row, cell=i) for row in state.trace]
        worst = max(worst, state.residual_fraction)
    return GeneralizedReflector(patches, restriction.base, restriction, worst,
                                {"cells": carve_cells, "trace": trace, "residual_fraction": worst})


def target_polygon(k: int, d: float, xi: float, t: float = 0.0):
    if k < 1 or d <= 0 or not -1.0 < xi < 0.0:
        raise ValueError("need k >= 1, d > 0 and -1 < xi < 0")
    if k == 1:
        return np.array([[0.0, 0.0, -d]])
    s = math.sin(math.acos(xi))
    ang = 2.0 * math.pi * np.arange(k) / k + t
    return np.stack([d * s * np.cos(ang), d * s * np.sin(ang), np.full(k, d * xi)], axis=1)


@dataclass(frozen=True)
class Ring:
    k: int
    d: float
    xi: float
    f: float
    t: float = 0.0


def ring_levels(g, c: float, energies):
    """Levels zeta_1 > ... > zeta_n = c with mu_g(Cap(z, zeta_i)) = f_1 + ... + f_i."""
    cum = np.cumsum(energies)
    z = [cap_level_for_mass(g, ZHAT, float(m), c) for m in cum[:-1]]
    return z + [float(c)]


def rot_sym_cells(c, z_prime, delta, rings, g):
    n = len(rings)
    zeta = ring_levels(g, c, [r.f for r in rings])
    cells = []
    for i, ring in enumerate(rings):
        band = Cap(ZHAT, zeta[0]) if i == 0 else Band(ZHAT, zeta[i], zeta[i - 1])
        pts = target_polygon(ring.k, ring.d, ring.xi, ring.t)
        for j in range(ring.k):
            region = band if ring.k == 1 else Intersection((band, Wedge(ring.k, j, ring.t)))
            cells.append(CellSpec(region, z_prime + i * delta / n, delta / n, pts[j], ring.f / ring.k))
    return cells, zeta


def merged_prescription(rings) -> TargetPrescription:
    pts, fs = [], []
    for ring in rings:
        for p in target_polygon(ring.k, ring.d, ring.xi, ring.t):
            for i, q in enumerate(pts):
                if np.allclose(q, p, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(p))):
                    fs[i] += ring.f / ring.k
                    break
            else:
                pts.append(p)
                fs.append(ring.f / ring.k)
    return TargetPrescription(np.array(pts).reshape(-1, 3), np.array(fs))


def design_rot_sym(c, z_prime, delta, rings, g, p: CarveParams = CarveParams()):
    """Rings of wedge cells stacked in equal slabs, each aimed at a k-gon vertex.

    Returns (reflector, prescription).
    """
    rings = [r if isinstance(r, Ring) else Ring(**r) for r in rings]
    if not rings or any(r.f <= 0 for r in rings):
        raise ValueError("need at least one ring with positive energy")
    if not 0.0 <= c < 1.0:
        raise ValueError("cap level must lie in [0, 1)")
    if g.symmetric_about(ZHAT) is None:
        raise TypeError("radiance must be rotationally symmetric about the z-axis")
    total = region_mass(g, Cap(ZHAT, c))
    if abs(sum(r.f for r in rings) - total) > ENERGY_RTOL * total:
        raise EnergyMismatch(-1, total, sum(r.f for r in rings))
    cells, zeta = rot_sym_cells(c, z_prime, delta, rings, g)
    restriction = ConicalCylinder(Cap(ZHAT, c), z_prime, delta)
    r = compose_multi_target(cells, restriction, g, p)
    r.meta["levels"] = zeta
    return r, merged_prescription(rings)
