"""Negative control: two patches whose joining wall shadows the outer patch.

The inner cap aims at a point below the source, the outer band aims across
the axis, so its chords pass under the inner patch. Interpolating the pair
adds a radial wall in their way and the outer target loses energy.
"""
import argparse

import numpy as np

from ellipsoid_reflector.conics import Ellipsoid
from ellipsoid_reflector.occlusion import PatchGeometry
from ellipsoid_reflector.reflector import GeneralizedReflector, Patch
from ellipsoid_reflector.sphere import Band, Cap, Uniform, ZHAT
from ellipsoid_reflector.verify import check_interpolation_condition, g2_equals_g1_check


def pair():
    xa, xb = np.array([0, 0, -1.0]), np.array([-3.0, 0, -1.0])
    a = Patch(PatchGeometry(Ellipsoid(xa, 0.5), Cap(ZHAT, 0.95)), xa, 0)
    b = Patch(PatchGeometry(Ellipsoid(xb, 3.0), Band(ZHAT, 0.8, 0.95)), xb, 1)
    return GeneralizedReflector([a, b], Cap(ZHAT, 0.8)), Uniform(support=Cap(ZHAT, 0.8))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--resolution", type=int, default=96)
    a = ap.parse_args()
    r, g = pair()
    cond = check_interpolation_condition(r, resolution=a.resolution)
    ev = cond["evidence"]
    print(f"condition holds: {cond['holds']}  (a={ev['a']} b={ev['b']} c={ev['c']}, {ev['walls']} wall triangles)")
    if ev["b_failures"]:
        print(f"  wall point inside chord cone of patch {ev['b_failures'][0]['cone']}: {ev['b_failures'][0]['wall_point']}")
    out = g2_equals_g1_check(r, g, a.samples, 13, resolution=a.resolution, diagnostic=True)
    for row in out["targets"]:
        print(f"target {row['point']}: G1 {row['G1']:.5f}  G2 {row['G2']:.5f}  diff {row['diff'] / row['se']:+.1f} SE")
