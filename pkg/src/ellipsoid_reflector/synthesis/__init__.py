from .carve import (
    CarveParams,
    CarveState,
    NoProgress,
    carve_cell,
    carve_single_target,
    carve_step,
    new_state,
    profile_Dk,
    projection_identity_check,
    region_area,
)
from .cells import CarveCell, CarvedRegion
from .compose import (
    CellSpec,
    EnergyMismatch,
    HypothesisViolated,
    Ring,
    cell_mass,
    check_hypothesis,
    compose_multi_target,
    design_rot_sym,
    merged_prescription,
    ring_levels,
    rot_sym_cells,
    target_polygon,
)
