"""Spherical measure, radiance integrals and inverse cap-mass queries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .regions import Cap, Band, FullSphere, Intersection, Region, Wedge, ZHAT, symmetric_interval
from .sampling import SphericalSampler, chunked_map


class ZeroVector(ValueError):
    pass


class MassOutOfRange(ValueError):
    pass


def project(p):
    """Radial projection onto the unit sphere."""
    p = np.asarray(p, dtype=float)
    n = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(n < 1e-300):
        raise ZeroVector("cannot project the origin")
    return p / n


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    count: int
    hits: int = -1

    def __float__(self):
        return self.mean


def _weighted_sums(weight_fn, s: SphericalSampler, threads=None):
    def work(c):
        w = weight_fn(s.chunk(c))
        return float(np.sum(w)), float(np.sum(w * w)), int(np.count_nonzero(w))

    parts = chunked_map(work, s.n_chunks, threads)
    arr = np.array([(a, b) for a, b, _ in parts])
    return arr[:, 0].sum(), arr[:, 1].sum(), sum(h for *_, h in parts)


def mc_estimate(weight_fn, s: SphericalSampler, threads=None) -> Estimate:
    """Monte Carlo integral of ``weight_fn`` over the sampler's domain."""
    total, total_sq, hits = _weighted_sums(weight_fn, s, threads)
    n = s.count
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    se = math.sqrt(var / (n - 1)) if n > 1 else math.inf
    return Estimate(float(s.area * mean), float(s.area * se), n, hits)


def spherical_measure(r: Region, s: SphericalSampler, threads=None) -> Estimate:
    if s.count < 1000:
        raise ValueError("need at least 1000 samples")
    return mc_estimate(lambda m: r.contains(m).astype(float), s, threads)


def radiance_integral(g, r: Region, s: SphericalSampler, threads=None) -> Estimate:
    if s.count < 1000:
        raise ValueError("need at least 1000 samples")
    return mc_estimate(lambda m: np.where(r.contains(m), g(m), 0.0), s, threads)


def _integrate(g, a, b):
    if b <= a:
        return 0.0
    # kinks of tabulated profiles go to quad as breakpoints
    knots = [float(k) for k in getattr(g, "levels", ()) if a < k < b] or None
    val, _ = integrate.quad(lambda u: float(g.profile(u)), a, b, points=knots, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def band_mass(g, axis, lower: float, upper: float) -> float:
    """mu_g of the band lower < <axis, m> < upper, by 1-D adaptive quadrature."""
    sup = g.symmetric_about(axis)
    if sup is None:
        raise TypeError("radiance is not rotationally symmetric about the given axis")
    lo = max(lower, sup[0], -1.0)
    hi = min(upper, sup[1], 1.0)
    return 2.0 * math.pi * _integrate(g, lo, hi)


def cap_mass(g, axis, level: float) -> float:
    return band_mass(g, axis, level, 1.0)


def cap_level_for_mass(g, axis, mass: float, c_outer: float) -> float:
    """Level z in [c_outer, 1) with mu_g(Cap(axis, z)) equal to ``mass``.

    Root of the monotone cap-mass profile.
    """
    total = cap_mass(g, axis, c_outer)
    if mass < 0 or mass > total * (1.0 + 1e-12):
        raise MassOutOfRange(f"mass {mass} outside [0, {total}]")
    if mass <= 0.0:
        return 1.0 - 1e-12
    if mass >= total:
        return float(c_outer)
    return float(optimize.brentq(lambda z: cap_mass(g, axis, z) - mass, c_outer, 1.0, xtol=1e-15, rtol=1e-15))


def region_mass(g, r: Region) -> float | None:
    """Deterministic mu_g(r) for caps, bands and band-wedge cells about the z-axis.

    Returns None when ``r`` or ``g`` has no rotational structure to exploit.
    """
    parts = r.parts if isinstance(r, Intersection) else (r,)
    wedges = [p for p in parts if isinstance(p, Wedge)]
    rest = [p for p in parts if not isinstance(p, Wedge)]
    if len(wedges) > 1 or len(rest) > 1:
        return None
    base = rest[0] if rest else FullSphere()
    iv = symmetric_interval(base, ZHAT)
    if iv is None:
        return None
    try:
        mass = band_mass(g, ZHAT, iv[0], iv[1])
    except TypeError:
        return None
    return mass / wedges[0].k if wedges else mass
