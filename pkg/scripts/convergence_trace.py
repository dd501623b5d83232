"""Print the carving trace of a single-target config, step by step.

Columns: patch index, focal parameter, covered measure, grid maximum,
whether the near-greedy rule held, and the remaining uncovered fraction.
"""
import argparse
import csv
import sys

import numpy as np

from ellipsoid_reflector.manifest import build_restriction, carve_params, load_config
from ellipsoid_reflector.sphere import sample_in_region
from ellipsoid_reflector.synthesis import CarveCell, carve_step, new_state, projection_identity_check

COLS = ["k", "d", "D", "D_grid_max", "greedy_ok", "residual_fraction", "identity_disagreement"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default="configs/single_thin_slab.json")
    ap.add_argument("--csv")
    a = ap.parse_args(argv)
    cfg = load_config(a.config)
    if cfg["mode"] != "single-target":
        ap.error("needs a single-target config")
    res = build_restriction(cfg)
    p = carve_params(cfg)
    cell = CarveCell(res.base, res.lo, res.hi, np.array(cfg["target"], dtype=float))
    state = new_state(cell, p)
    probe = sample_in_region(res.base, 20_000, seed=17)
    rows = []
    print(" ".join(f"{c:>12s}" for c in COLS))
    while state.residual_fraction > p.stop_residual and len(cell.ds) < p.max_patches:
        row = carve_step(state, p)
        if row is None:
            print("no progress", file=sys.stderr)
            return 3
        row["identity_disagreement"] = projection_identity_check(cell, len(cell.ds), probe)["fraction"]
        rows.append(row)
        print(" ".join(f"{row[c]:>12.6g}" if not isinstance(row[c], bool) else f"{str(row[c]):>12s}" for c in COLS))
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, COLS, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
