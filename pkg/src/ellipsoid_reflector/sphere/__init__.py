from .measure import (
    Estimate,
    MassOutOfRange,
    ZeroVector,
    band_mass,
    cap_level_for_mass,
    cap_mass,
    mc_estimate,
    project,
    radiance_integral,
    region_mass,
    spherical_measure,
)
from .radiance import CosPower, RadialTable, Radiance, Uniform, radiance_from_dict
from .regions import (
    Band,
    Cap,
    Difference,
    EmptyRegion,
    FullSphere,
    HalfSpaceProj,
    Intersection,
    Region,
    Union,
    Wedge,
    ZHAT,
    region_contains,
    region_from_dict,
    register,
    wedge_azimuth_window,
)
from .sampling import CHUNK, SphericalSampler, chunk_rng, chunked_map, resolve_threads, sample_in_region
