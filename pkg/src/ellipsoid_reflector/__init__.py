"""Ellipsoid-patch reflectors confined to a conical cylinder."""

__version__ = "0.1.0"

from .conics import Ellipsoid, eccentricity, polar_radius, ray_hit, reflect_direction, surface_normal
from .reflector import (
    ConicalCylinder,
    GeneralizedReflector,
    InterpolatedReflector,
    Patch,
    TargetPrescription,
    interpolate,
)
