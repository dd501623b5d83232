"""Design configs and manifests (JSON)."""
from __future__ import annotations

import hashlib
import json
from dataclasses import fields

import jsonschema
import numpy as np

from . import __version__
from .reflector import ConicalCylinder, GeneralizedReflector, TargetPrescription
from .sphere.measure import region_mass
from .sphere.radiance import radiance_from_dict
from .sphere.regions import Cap, ZHAT, region_from_dict
from .synthesis import (
    CarveCell,
    CarveParams,
    CellSpec,
    Ring,
    carve_single_target,
    cell_mass,
    compose_multi_target,
    design_rot_sym,
)


class ConfigError(ValueError):
    pass


_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_energy = {
    "oneOf": [
        {"required": ["f"], "not": {"required": ["fraction"]}},
        {"required": ["fraction"], "not": {"required": ["f"]}},
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["restriction", "radiance", "mode"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "restriction": {
            "type": "object",
            "required": ["z_prime", "delta"],
            "additionalProperties": False,
            "properties": {
                "cap": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "base": {"type": "object", "required": ["kind"]},
                "z_prime": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0},
            },
            "oneOf": [{"required": ["cap"]}, {"required": ["base"]}],
        },
        "radiance": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["uniform", "cos-power", "radial-table"]}},
        },
        "mode": {"enum": ["single-target", "multi-target", "rot-sym"]},
        "target": _vec3,
        "rings": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["k", "d", "xi"],
                "additionalProperties": False,
                "properties": {
                    "k": {"type": "integer", "minimum": 1},
                    "d": {"type": "number", "exclusiveMinimum": 0},
                    "xi": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 0},
                    "t": {"type": "number"},
                    "f": {"type": "number", "exclusiveMinimum": 0},
                    "fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                },
                **_energy,
            },
        },
        "cells": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["region", "a", "b", "target"],
                "additionalProperties": False,
                "properties": {
                    "region": {"type": "object", "required": ["kind"]},
                    "a": {"type": "number"},
                    "b": {"type": "number", "exclusiveMinimum": 0},
                    "target": _vec3,
                    "f": {"type": "number", "minimum": 0},
                    "fraction": {"type": "number", "minimum": 0, "maximum": 1},
                },
                **_energy,
            },
        },
        "carve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_min": {"type": "number", "exclusiveMinimum": 0},
                "d_max": {"type": "number", "exclusiveMinimum": 0},
                "grid_count": {"type": "integer", "minimum": 2},
                "refinements": {"type": "integer", "minimum": 0},
                "epsilon_rule": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "stop_residual": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_patches": {"type": "integer", "minimum": 1},
                "measure_samples": {"type": "integer", "minimum": 1000},
                "seed": {"type": "integer", "minimum": 0},
                "stall_refinements": {"type": "integer", "minimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "verify": {
            "type": "object",
            "properties": {"samples": {"type": "integer", "minimum": 10000}, "seed": {"type": "integer", "minimum": 0}},
        },
    },
    "allOf": [
        {"if": {"properties": {"mode": {"const": "single-target"}}}, "then": {"required": ["target"]}},
        {"if": {"properties": {"mode": {"const": "multi-target"}}}, "then": {"required": ["cells"]}},
        {"if": {"properties": {"mode": {"const": "rot-sym"}}}, "then": {"required": ["rings"]}},
    ],
}


def validate_config(cfg: dict) -> dict:
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.path))
    if errs:
        e = errs[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ConfigError(f"config field {where}: {e.message}")
    if cfg["mode"] == "rot-sym" and "cap" not in cfg["restriction"]:
        raise ConfigError("config field restriction: rot-sym designs need a cap level")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return validate_config(cfg)


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def build_restriction(cfg) -> ConicalCylinder:
    rc = cfg["restriction"]
    base = Cap(ZHAT, float(rc["cap"])) if "cap" in rc else region_from_dict(rc["base"])
    return ConicalCylinder(base, float(rc["z_prime"]), float(rc["delta"]))


def build_radiance(cfg, restriction=None):
    restriction = build_restriction(cfg) if restriction is None else restriction
    return radiance_from_dict(cfg["radiance"], default_support=restriction.base)


def carve_params(cfg) -> CarveParams:
    kw = dict(cfg.get("carve", {}))
    kw.setdefault("seed", cfg.get("seed", 0))
    names = {f.name for f in fields(CarveParams)}
    return CarveParams(**{k: v for k, v in kw.items() if k in names})


def _energy_of(item, mu):
    return float(item["f"]) if "f" in item else float(item["fraction"]) * mu


def design_from_config(cfg: dict):
    """Run the configured synthesis. Returns (reflector, prescription)."""
    restriction = build_restriction(cfg)
    g = build_radiance(cfg, restriction)
    p = carve_params(cfg)
    mode = cfg["mode"]
    if mode == "rot-sym":
        c = float(cfg["restriction"]["cap"])
        mu = region_mass(g, Cap(ZHAT, c))
        rings = [Ring(int(r["k"]), float(r["d"]), float(r["xi"]), _energy_of(r, mu), float(r.get("t", 0.0)))
                 for r in cfg["rings"]]
        return design_rot_sym(c, restriction.z_prime, restriction.delta, rings, g, p)
    if mode == "single-target":
        x = np.array(cfg["target"], dtype=float)
        r = carve_single_target(restriction, x, g, p)
        mu, _ = cell_mass(g, restriction.base, p.seed)
        return r, TargetPrescription(x[None], [mu])
    mu, _ = cell_mass(g, restriction.base, p.seed)
    cells = [CellSpec(region_from_dict(c["region"]), float(c["a"]), float(c["b"]), np.array(c["target"], dtype=float),
                      _energy_of(c, mu)) for c in cfg["cells"]]
    r = compose_multi_target(cells, restriction, g, p)
    pts, fs = [], []
    for c in cells:
        for i, q in enumerate(pts):
            if np.array_equal(q, c.target):
                fs[i] += c.energy
                break
        else:
            pts.append(c.target)
            fs.append(c.energy)
    return r, TargetPrescription(np.array(pts), np.array(fs))


def manifest_dict(cfg: dict, r: GeneralizedReflector, F: TargetPrescription | None) -> dict:
    cells = r.meta.get("cells", [])
    return {
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "cells": {c.cell_id: c.to_dict() for c in cells},
        "reflector": r.to_dict(),
        "residual": r.residual,
        "capped": bool(r.meta.get("capped", False)),
        "trace": r.meta.get("trace", []),
        "levels": r.meta.get("levels"),
        "prescription": None if F is None else F.to_dict(),
    }


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_manifest(path, cfg, r, F=None):
    dump_json(manifest_dict(cfg, r, F), path)


def reflector_from_manifest(d: dict) -> GeneralizedReflector:
    ctx = {}
    for cid, cd in d.get("cells", {}).items():
        cell = CarveCell.from_dict(cd)
        cell.cell_id = cid
        ctx[cid] = cell
    r = GeneralizedReflector.from_dict(d["reflector"], ctx)
    r.meta.update(cells=list(ctx.values()), trace=d.get("trace", []), levels=d.get("levels"))
    return r


def load_manifest(path):
    """(reflector, config, prescription or None) from a manifest file."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    for key in ("version", "config", "reflector"):
        if key not in d:
            raise ConfigError(f"manifest field {key}: missing")
    F = TargetPrescription.from_dict(d["prescription"]) if d.get("prescription") else None
    return reflector_from_manifest(d), d["config"], F


def load_prescription(path) -> TargetPrescription:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "points" not in d or "energies" not in d:
        raise ConfigError("prescription needs 'points' and 'energies'")
    return TargetPrescription.from_dict(d)
