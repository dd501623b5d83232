"""Wavefront OBJ export of patches (and optional walls)."""
from __future__ import annotations

import numpy as np

from .reflector import GeneralizedReflector, InterpolatedReflector, _dirs, _grid, interpolate


def patch_meshes(r: GeneralizedReflector, resolution: int):
    """Per patch: (vertices, triangles) over the (theta, phi) grid of the aperture.

    A grid quad contributes its triangles when all of their corners select the
    patch, so each mesh stays inside its patch region.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    axis, th, ph = _grid(r, resolution)
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = _dirs(axis, T, P)
    nt, nphi = T.shape
    lab = r.select(dirs.reshape(-1, 3)).reshape(nt, nphi)
    out = []
    for j, p in enumerate(r.patches):
        mask = lab == j
        idx = -np.ones((nt, nphi), dtype=np.int64)
        idx[mask] = np.arange(mask.sum())
        m = dirs[mask]
        verts = m * p.ellipsoid.radius(m)[:, None] if len(m) else np.empty((0, 3))
        tris = []
        for i in range(nt - 1):
            for k in range(nphi):
                k1 = (k + 1) % nphi
                a, b, c, d = idx[i, k], idx[i, k1], idx[i + 1, k1], idx[i + 1, k]
                if a >= 0 and b >= 0 and c >= 0:
                    tris.append((a, b, c))
                if a >= 0 and c >= 0 and d >= 0:
                    tris.append((a, c, d))
        out.append((verts, np.array(tris, dtype=np.int64).reshape(-1, 3)))
    return out


def write_obj(path, r, resolution: int = 64, interpolated: bool = False):
    base = r.base if isinstance(r, InterpolatedReflector) else r
    meshes = patch_meshes(base, resolution)
    walls = None
    if interpolated:
        ir = r if isinstance(r, InterpolatedReflector) else interpolate(base, max(resolution, 8))
        walls = ir.walls
    offset = 1
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {len(base.patches)} patches, resolution {resolution}\n")
        for p, (v, t) in zip(base.patches, meshes):
            fh.write(f"o patch_{p.priority}\n")
            for q in v:
                fh.write("v %r %r %r\n" % tuple(map(float, q)))
            for a, b, c in t + offset:
                fh.write(f"f {a} {b} {c}\n")
            offset += len(v)
        if walls is not None and len(walls):
            fh.write("o walls\n")
            for tri in walls:
                for q in tri:
                    fh.write("v %r %r %r\n" % tuple(map(float, q)))
                fh.write(f"f {offset} {offset + 1} {offset + 2}\n")
                offset += 3


def read_obj(path):
    """{object name: (vertices, faces)} with faces indexed into the object's own vertices."""
    objs, name, verts, faces = {}, None, [], []
    allv = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0] == "#":
                continue
            if parts[0] == "o":
                name = parts[1]
                objs[name] = ([], [])
            elif parts[0] == "v":
                allv.append([float(x) for x in parts[1:4]])
                objs[name][0].append(len(allv) - 1)
            elif parts[0] == "f":
                objs[name][1].append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    allv = np.array(allv).reshape(-1, 3)
    res = {}
    for k, (vi, f) in objs.items():
        vi = np.array(vi, dtype=np.int64)
        remap = {g: i for i, g in enumerate(vi)}
        res[k] = (allv[vi], np.array([[remap[g] for g in tri] for tri in f], dtype=np.int64).reshape(-1, 3))
    return res
