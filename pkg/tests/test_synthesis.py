import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ellipsoid_reflector.conics import focal_parameter_through
from ellipsoid_reflector.occlusion import mutual_clear
from ellipsoid_reflector.reflector import ConicalCylinder, TargetPrescription
from ellipsoid_reflector.sphere import (
    Band,
    Cap,
    CosPower,
    Intersection,
    Uniform,
    Wedge,
    ZHAT,
    cap_mass,
    region_from_dict,
    sample_in_region,
)
from ellipsoid_reflector.synthesis import (
    CarveCell,
    CarveParams,
    CellSpec,
    EnergyMismatch,
    HypothesisViolated,
    NoProgress,
    Ring,
    carve_cell,
    carve_single_target,
    carve_step,
    cell_mass,
    check_hypothesis,
    compose_multi_target,
    design_rot_sym,
    merged_prescription,
    new_state,
    profile_Dk,
    projection_identity_check,
    ring_levels,
    target_polygon,
)

X = np.array([0.0, 0.0, -1.0])
THICK = ConicalCylinder(Cap(ZHAT, 0.9), 1.0, 5.0)
THIN = ConicalCylinder(Cap(ZHAT, 0.9), 1.0, 0.05)
P = CarveParams(seed=3)


def thick_state():
    return new_state(CarveCell(THICK.base, THICK.lo, THICK.hi, X), P)


def test_profile_examples():
    s = thick_state()
    assert profile_Dk(s, X, 1e-3).mean == 0.0
    assert profile_Dk(s, X, 1e3).mean == 0.0
    # an ellipsoid crossing the slab midway lifts the whole cap
    d = float(focal_parameter_through(np.array([[0, 0, 3.0]]), X)[0])
    est = profile_Dk(s, X, d)
    assert est.mean >= 0.9 * 2 * math.pi * 0.1
    with pytest.raises(ValueError):
        profile_Dk(s, X, -1.0)
    with pytest.raises(ValueError):
        profile_Dk(s, X + 1, d)


def test_profile_bounded_by_uncovered_area():
    s = thick_state()
    for d in np.geomspace(0.1, 20, 25):
        assert 0 <= profile_Dk(s, X, d).mean <= s.residual + 1e-12


def test_thick_slab_needs_one_patch():
    r = carve_single_target(THICK, X, Uniform(), P)
    assert len(r.patches) == 1
    assert r.residual <= P.stop_residual


def test_thin_slab_needs_several_patches():
    r = carve_single_target(THIN, X, Uniform(), P)
    tr = r.meta["trace"]
    assert len(r.patches) > 1
    res = [row["residual"] for row in tr]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert r.residual <= P.stop_residual
    # selected profile values never increase
    D = [row["D_count"] for row in tr]
    assert all(b <= a for a, b in zip(D, D[1:]))


def test_greedy_rule_recorded():
    r = carve_single_target(THIN, X, Uniform(), P)
    for row in r.meta["trace"]:
        assert row["greedy_ok"] == (row["D"] >= (1 - P.epsilon_rule) * row["D_grid_max"])
    assert r.meta["trace"][0]["greedy_ok"]


def test_patches_lie_in_slab():
    r = carve_single_target(THIN, X, Uniform(), P)
    m = sample_in_region(THIN.base, 20000, seed=1)
    rad, ids = r.rho(m)
    ok = ids >= 0
    assert ok.mean() > 0.99
    z = m[ok, 2] * rad[ok]
    assert z.min() >= THIN.lo - 1e-9 and z.max() <= THIN.hi + 1e-9


def test_carved_patches_mutually_clear():
    r = carve_single_target(THIN, X, Uniform(), P)
    ok, pair = mutual_clear([(p.geometry, p.target) for p in r.patches], n_occ=1024)
    assert ok, pair


def test_zero_radiance_gives_empty_reflector():
    r = carve_single_target(THIN, X, Uniform(support=Cap(-ZHAT, 0.5)), P)
    assert r.patches == [] and r.residual == 0.0


def test_target_must_be_below():
    with pytest.raises(ValueError):
        carve_single_target(THIN, np.array([0, 0, 1.0]), Uniform(), P)


def test_no_progress_when_slab_unreachable():
    # a tiny search range that cannot lift anything
    p = CarveParams(d_min=1e-4, d_max=2e-4, seed=1)
    with pytest.raises(NoProgress) as ei:
        carve_single_target(THIN, X, Uniform(), p)
    assert ei.value.state["residual_fraction"] == 1.0


def test_patch_cap_flags_result():
    r = carve_single_target(THIN, X, Uniform(), CarveParams(seed=3, max_patches=1))
    assert len(r.patches) == 1 and r.meta["capped"]


def test_projection_identity_each_step():
    cell = CarveCell(THIN.base, THIN.lo, THIN.hi, X)
    s = new_state(cell, P)
    m = sample_in_region(THIN.base, 4000, seed=9)
    while s.residual_fraction > P.stop_residual:
        carve_step(s, P)
        rep = projection_identity_check(cell, len(cell.ds), m)
        assert rep["fraction"] <= 1e-3


def test_carved_region_round_trip():
    cell = CarveCell(THIN.base, THIN.lo, THIN.hi, X)
    carve_cell(cell, P)
    cell.cell_id = "c0"
    reg = cell.region(1)
    back = region_from_dict(reg.to_dict(), {"c0": CarveCell.from_dict(cell.to_dict())})
    m = sample_in_region(THIN.base, 5000, seed=2)
    np.testing.assert_array_equal(reg.contains(m), back.contains(m))


def test_carved_regions_partition_base():
    cell = CarveCell(THIN.base, THIN.lo, THIN.hi, X)
    s = carve_cell(cell, P)
    m = sample_in_region(THIN.base, 20000, seed=4)
    count = sum(cell.region(j).contains(m).astype(int) for j in range(len(cell.ds)))
    assert count.max() == 1
    assert 1 - count.mean() <= 5 * P.stop_residual


def test_target_polygon_examples():
    np.testing.assert_allclose(target_polygon(1, 2.0, -0.6), [[0, 0, -2.0]])
    sq = target_polygon(4, 3.0, -0.5)
    np.testing.assert_allclose(np.linalg.norm(sq, axis=1), 3.0)
    np.testing.assert_allclose(sq[:, 2], -1.5)
    np.testing.assert_allclose(sq[0], [3 * math.sqrt(0.75), 0, -1.5], atol=1e-12)
    with pytest.raises(ValueError):
        target_polygon(3, 1.0, 0.2)


@given(st.integers(1, 12), st.floats(0.1, 10), st.floats(-0.99, -0.01), st.floats(0, 6.3))
def test_polygon_is_regular(k, d, xi, t):
    pts = target_polygon(k, d, xi, t)
    assert len(pts) == k
    np.testing.assert_allclose(pts[:, 2], d * xi if k > 1 else -d)
    if k > 2:
        sides = np.linalg.norm(pts - np.roll(pts, 1, axis=0), axis=1)
        np.testing.assert_allclose(sides, sides[0], rtol=1e-9)


def test_ring_levels_match_masses():
    g = CosPower(ZHAT, 1.0, 2.0, Cap(ZHAT, 0.3))
    total = cap_mass(g, ZHAT, 0.3)
    z = ring_levels(g, 0.3, [0.2 * total, 0.5 * total, 0.3 * total])
    assert z[-1] == 0.3 and z[0] > z[1] > z[2]
    assert cap_mass(g, ZHAT, z[0]) == pytest.approx(0.2 * total, rel=1e-9)
    assert cap_mass(g, ZHAT, z[1]) == pytest.approx(0.7 * total, rel=1e-9)


def test_merged_prescription_shares_points():
    rings = [Ring(1, 2.0, -0.6, 1.0), Ring(1, 2.0, -0.6, 2.0), Ring(4, 3.0, -0.5, 4.0)]
    F = merged_prescription(rings)
    assert len(F.points) == 5
    assert F.energies[0] == pytest.approx(3.0)
    np.testing.assert_allclose(F.energies[1:], 1.0)


def test_rot_sym_design(rot_sym_design):
    r, F, g = rot_sym_design
    mu = cap_mass(g, ZHAT, 0.7)
    assert F.conserves(mu)
    assert len(F.points) == 5
    assert len(r.meta["cells"]) == 5
    z = r.meta["levels"]
    assert cap_mass(g, ZHAT, z[0]) == pytest.approx(0.6 * mu, rel=1e-9)
    # each cell mass matches its target's share
    for i, c in enumerate(r.meta["cells"]):
        m, _ = cell_mass(g, c.base)
        assert m == pytest.approx(F.energy_for(c.target)[0], rel=1e-6)
    assert r.residual <= CarveParams().stop_residual


def test_rot_sym_design_rejects_bad_energies():
    g = Uniform(support=Cap(ZHAT, 0.7))
    with pytest.raises(EnergyMismatch):
        design_rot_sym(0.7, 1.0, 1.0, [Ring(1, 2.0, -0.6, 1.0)], g)
    with pytest.raises(TypeError):
        design_rot_sym(0.7, 1.0, 1.0, [Ring(1, 2.0, -0.6, 1.0)], CosPower(np.array([1.0, 0, 0])))


def test_composition_detects_crossing_chords():
    band, cap = Band(ZHAT, 0.7, 0.9), Cap(ZHAT, 0.9)
    g = Uniform(support=Cap(ZHAT, 0.7))
    cells = [CellSpec(cap, 1.0, 0.5, X, cell_mass(g, cap)[0]),
             CellSpec(band, 1.0, 0.5, [3.0, 0, -1.0], cell_mass(g, band)[0])]
    with pytest.raises(HypothesisViolated) as ei:
        compose_multi_target(cells, ConicalCylinder(Cap(ZHAT, 0.7), 1.0, 0.5), g)
    e = ei.value
    assert {e.i, e.j} == {0, 1}
    assert cells[e.i].contains(e.witness)[0]


def test_stacked_rings_satisfy_hypothesis(rot_sym_design):
    from ellipsoid_reflector.synthesis import rot_sym_cells
    g = rot_sym_design[2]
    mu = cap_mass(g, ZHAT, 0.7)
    cells, _ = rot_sym_cells(0.7, 1.0, 1.0, [Ring(1, 2.0, -0.6, 0.6 * mu), Ring(4, 3.0, -0.5, 0.4 * mu)], g)
    assert check_hypothesis(cells)


def test_composition_energy_mismatch():
    g = Uniform(support=Cap(ZHAT, 0.9))
    with pytest.raises(EnergyMismatch):
        compose_multi_target([CellSpec(Cap(ZHAT, 0.9), 1.0, 0.05, X, 1.0)], THIN, g)


def test_single_cell_matches_single_target():
    g = Uniform(support=Cap(ZHAT, 0.9))
    a = carve_single_target(THIN, X, g, P)
    b = compose_multi_target([CellSpec(THIN.base, THIN.lo, THIN.delta, X, cell_mass(g, THIN.base)[0])], THIN, g, P)
    assert [p.ellipsoid.d for p in a.patches] == [p.ellipsoid.d for p in b.patches]


def test_wedge_cells_keep_targets():
    g = Uniform(support=Cap(ZHAT, 0.7))
    cells = []
    pts = target_polygon(3, 3.0, -0.5)
    for j in range(3):
        region = Intersection((Cap(ZHAT, 0.7), Wedge(3, j)))
        cells.append(CellSpec(region, 1.0 + j, 1.0, pts[j], cell_mass(g, region)[0]))
    r = compose_multi_target(cells, ConicalCylinder(Cap(ZHAT, 0.7), 1.0, 3.0), g, P)
    for p in r.patches:
        assert any(np.array_equal(p.target, q) for q in pts)
    F = TargetPrescription(pts, [cell_mass(g, c.region)[0] for c in cells])
    assert F.conserves(cap_mass(g, ZHAT, 0.7))
