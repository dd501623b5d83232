"""Command-line front end.

Exit codes: 0 pass, 2 verification failed, 3 synthesis failed, 4 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .manifest import (
    ConfigError,
    build_radiance,
    design_from_config,
    dump_json,
    load_config,
    load_manifest,
    load_prescription,
    write_manifest,
)
from .mesh import write_obj
from .reflector import UNDEFINED, BLOCKED, TARGET
from .sphere.sampling import SphericalSampler, chunked_map
from .synthesis import EnergyMismatch, HypothesisViolated, NoProgress
from .verify import energy_report, trace_batch

EXIT_OK, EXIT_FAIL, EXIT_SYNTH, EXIT_CONFIG = 0, 2, 3, 4

log = logging.getLogger("ellipsoid_reflector")

CSV_HEADER = ["m_x", "m_y", "m_z", "patch", "result", "target", "miss_distance"]


def _threads(args):
    if getattr(args, "threads", None):
        os.environ["REFLECTOR_THREADS"] = str(args.threads)
    return args.threads


def cmd_design(args) -> int:
    try:
        cfg = load_config(args.config)
        r, F = design_from_config(cfg)
    except (ConfigError, EnergyMismatch, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NoProgress, HypothesisViolated) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, NoProgress):
            diag["state"] = exc.state
        else:
            diag.update(i=exc.i, j=exc.j, witness=exc.witness.tolist())
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return EXIT_SYNTH
    write_manifest(args.out, cfg, r, F)
    if args.prescription_out:
        dump_json(F.to_dict(), args.prescription_out)
    log.info("%d patches, residual fraction %.3g", len(r.patches), r.residual)
    return EXIT_OK


def cmd_verify(args) -> int:
    _threads(args)
    try:
        r, cfg, F = load_manifest(args.manifest)
        if args.prescription:
            F = load_prescription(args.prescription)
        if F is None:
            raise ConfigError("no prescription given and none stored in the manifest")
        g = build_radiance(cfg)
        rep = energy_report(r, g, F, args.samples, args.seed, args.threads)
    except (ConfigError, OSError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    out = rep.to_dict()
    out["residual"] = r.residual
    if args.out:
        dump_json(out, args.out)
    else:
        print(json.dumps(out, indent=1, sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_export_mesh(args) -> int:
    try:
        r, _, _ = load_manifest(args.manifest)
        write_obj(args.out, r, args.resolution, args.interpolated)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def trace_rows(r, s: SphericalSampler, threads=None):
    names = {TARGET: "target", BLOCKED: "blocked", UNDEFINED: "lost"}

    def work(c):
        m = s.chunk(c)
        b = trace_batch(r, m)
        return m, b

    for m, b in chunked_map(work, s.n_chunks, threads):
        for i in range(len(m)):
            yield [repr(float(m[i, 0])), repr(float(m[i, 1])), repr(float(m[i, 2])), int(b.patch[i]),
                   names[int(b.kind[i])], int(b.target[i]),
                   "" if not np.isfinite(b.miss[i]) else repr(float(b.miss[i]))]


def cmd_trace_csv(args) -> int:
    _threads(args)
    try:
        r, _, _ = load_manifest(args.manifest)
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    s = SphericalSampler(args.seed, args.samples)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in trace_rows(r, s, args.threads):
            w.writerow(row)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="reflector", description=__doc__)
    ap.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    d = sub.add_parser("design", help="synthesize a reflector from a JSON config")
    d.add_argument("--config", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--prescription-out")
    d.set_defaults(fn=cmd_design)

    v = sub.add_parser("verify", help="ray-trace a manifest against a prescription")
    v.add_argument("--manifest", required=True)
    v.add_argument("--prescription")
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify)

    e = sub.add_parser("export-mesh", help="write patches (and walls) as OBJ")
    e.add_argument("--manifest", required=True)
    e.add_argument("--resolution", type=int, default=64)
    e.add_argument("--interpolated", action="store_true")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_export_mesh)

    t = sub.add_parser("trace-csv", help="dump per-ray trace outcomes")
    t.add_argument("--manifest", required=True)
    t.add_argument("--samples", type=int, default=10_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_trace_csv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
