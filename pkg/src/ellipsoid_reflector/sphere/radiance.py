"""Radiance presets: nonnegative densities on the sphere with a support region."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .regions import FullSphere, Region, ZHAT, region_from_dict, symmetric_interval, _unit3


class Radiance:
    support: Region
    axis: np.ndarray | None = None

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        single = m.ndim == 1
        mb = m.reshape(-1, 3)
        val = np.zeros(len(mb))
        inside = self.support.contains(mb)
        if inside.any():
            val[inside] = np.maximum(self._density(mb[inside]), 0.0)
        return float(val[0]) if single else val

    def _density(self, m):
        raise NotImplementedError

    def profile(self, u):
        """Density as a function of <axis, m> (rotationally symmetric presets only)."""
        raise TypeError(f"{type(self).__name__} has no radial profile")

    def symmetric_about(self, axis) -> tuple[float, float] | None:
        """Support interval in <axis, m> if the radiance is symmetric about ``axis``."""
        if self.axis is not None and not np.allclose(self.axis, _unit3(axis), atol=1e-14):
            return None
        return symmetric_interval(self.support, axis)


@dataclass(frozen=True, eq=False)
class Uniform(Radiance):
    value: float = 1.0
    support: Region = field(default_factory=FullSphere)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("radiance must be nonnegative")

    def _density(self, m):
        return np.full(len(m), self.value)

    def profile(self, u):
        return np.full(np.shape(u), self.value)

    def to_dict(self):
        return {"kind": "uniform", "value": self.value, "support": self.support.to_dict()}


@dataclass(frozen=True, eq=False)
class CosPower(Radiance):
    """``scale * max(<axis, m>, 0) ** power``."""

    axis: np.ndarray = field(default_factory=lambda: ZHAT.copy())
    power: float = 1.0
    scale: float = 1.0
    support: Region = field(default_factory=FullSphere)

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit3(self.axis))
        if self.scale < 0 or self.power < 0:
            raise ValueError("scale and power must be nonnegative")

    def _density(self, m):
        return self.profile(m @ self.axis)

    def profile(self, u):
        return self.scale * np.maximum(np.asarray(u, dtype=float), 0.0) ** self.power

    def to_dict(self):
        return {"kind": "cos-power", "axis": self.axis.tolist(), "power": self.power,
                "scale": self.scale, "support": self.support.to_dict()}


@dataclass(frozen=True, eq=False)
class RadialTable(Radiance):
    """Piecewise-linear in <axis, m> through ``(levels[i], values[i])``, held flat outside."""

    axis: np.ndarray = field(default_factory=lambda: ZHAT.copy())
    levels: tuple = (-1.0, 1.0)
    values: tuple = (1.0, 1.0)
    support: Region = field(default_factory=FullSphere)

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit3(self.axis))
        lv = np.asarray(self.levels, dtype=float)
        vv = np.asarray(self.values, dtype=float)
        if lv.shape != vv.shape or lv.ndim != 1 or len(lv) < 2:
            raise ValueError("levels and values must be matching 1-D sequences")
        if np.any(np.diff(lv) <= 0):
            raise ValueError("levels must increase")
        if np.any(vv < 0):
            raise ValueError("radiance must be nonnegative")
        object.__setattr__(self, "levels", tuple(lv.tolist()))
        object.__setattr__(self, "values", tuple(vv.tolist()))

    def _density(self, m):
        return self.profile(m @ self.axis)

    def profile(self, u):
        return np.interp(u, self.levels, self.values)

    def to_dict(self):
        return {"kind": "radial-table", "axis": self.axis.tolist(), "levels": list(self.levels),
                "values": list(self.values), "support": self.support.to_dict()}


def radiance_from_dict(d: dict, default_support: Region | None = None) -> Radiance:
    d = dict(d)
    kind = d.pop("kind")
    if "support" in d:
        d["support"] = region_from_dict(d["support"])
    elif default_support is not None:
        d["support"] = default_support
    if kind == "uniform":
        return Uniform(**d)
    if kind == "cos-power":
        return CosPower(**d)
    if kind == "radial-table":
        return RadialTable(**d)
    raise ValueError(f"unknown radiance kind {kind!r}")
