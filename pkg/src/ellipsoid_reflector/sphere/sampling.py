"""Reproducible direction samplers.

Samples are generated in fixed-size chunks; chunk ``c`` of stream ``s`` draws
from a Philox generator keyed by ``(seed, s, c)``. Work can therefore be
split across any number of threads and still reproduce the same bits.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

CHUNK = 1 << 16
STRATA = 64


def chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(chunk)])
    return np.random.Generator(np.random.Philox(ss))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("REFLECTOR_THREADS", "1") or 1)
    return max(1, int(threads))


def chunked_map(fn, n_chunks: int, threads: int | None = None):
    """``[fn(c) for c in range(n_chunks)]`` on a thread pool, order preserved."""
    threads = resolve_threads(threads)
    if threads == 1 or n_chunks <= 1:
        return [fn(c) for c in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chunks)))


def _frame(axis):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2, axis


def directions_from(u, phi, axis=None):
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    local = np.stack([s * np.cos(phi), s * np.sin(phi), u], axis=1)
    if axis is None:
        return local
    e1, e2, e3 = _frame(axis)
    return local @ np.stack([e1, e2, e3])


@dataclass(frozen=True)
class SphericalSampler:
    """``scheme`` is ``"uniform-sphere"`` or ``"stratified-cap"`` (needs axis, level)."""

    seed: int
    count: int
    scheme: str = "uniform-sphere"
    axis: tuple = (0.0, 0.0, 1.0)
    level: float = -1.0
    stream: int = 0

    def __post_init__(self):
        if self.scheme not in ("uniform-sphere", "stratified-cap"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.count < 1:
            raise ValueError("count must be positive")

    @classmethod
    def for_cap(cls, seed, count, axis, level, stream=0):
        return cls(seed, count, "stratified-cap", tuple(float(a) for a in axis), float(level), stream)

    @property
    def area(self) -> float:
        if self.scheme == "uniform-sphere":
            return 4.0 * math.pi
        return 2.0 * math.pi * (1.0 - self.level)

    @property
    def n_chunks(self) -> int:
        return -(-self.count // CHUNK)

    def chunk(self, c: int) -> np.ndarray:
        start = c * CHUNK
        n = min(CHUNK, self.count - start)
        rng = chunk_rng(self.seed, self.stream, c)
        r = rng.random((n, 2))
        if self.scheme == "uniform-sphere":
            u = 2.0 * r[:, 0] - 1.0
            return directions_from(u, 2.0 * math.pi * r[:, 1])
        # stratum follows the global index, so chunking never changes it
        idx = np.arange(start, start + n)
        stratum = idx % STRATA
        u = self.level + (1.0 - self.level) * (stratum + r[:, 0]) / STRATA
        return directions_from(u, 2.0 * math.pi * r[:, 1], self.axis)

    def directions(self) -> np.ndarray:
        return np.concatenate([self.chunk(c) for c in range(self.n_chunks)])

    def with_stream(self, stream: int) -> "SphericalSampler":
        return SphericalSampler(self.seed, self.count, self.scheme, self.axis, self.level, stream)


def sample_in_region(region, n: int, seed: int, stream: int = 0, max_rounds: int = 64):
    """``n`` directions drawn uniformly from ``region`` by rejection from its bounding cap."""
    axis, level = region.bounding_cap()
    out = []
    got = 0
    batch = max(1024, 2 * n)
    for rnd in range(max_rounds):
        rng = chunk_rng(seed, stream, rnd)
        r = rng.random((batch, 2))
        u = level + (1.0 - level) * r[:, 0]
        m = directions_from(u, 2.0 * math.pi * r[:, 1], axis)
        m = m[region.contains(m)]
        out.append(m)
        got += len(m)
        if got >= n:
            break
        if rnd == 0 and got == 0:
            batch *= 8
    m = np.concatenate(out) if out else np.empty((0, 3))
    return m[:n]
