import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ellipsoid_reflector.conics import Ellipsoid, focal_parameter_through
from ellipsoid_reflector.occlusion import PatchGeometry
from ellipsoid_reflector.reflector import GeneralizedReflector, Patch
from ellipsoid_reflector.sphere import Band, Cap, Uniform, ZHAT, cap_mass
from ellipsoid_reflector.synthesis import CarveParams, Ring, design_rot_sym

settings.register_profile("repo", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def make_patch(x, d, region, priority=0, target=None):
    x = np.asarray(x, dtype=float)
    return Patch(PatchGeometry(Ellipsoid(x, d), region), x if target is None else target, priority)


def stacked_pair(rng, blocking):
    """Two confocal patches; the second sits on the first's chords when blocking."""
    x = np.array([*rng.uniform(-0.5, 0.5, 2), -rng.uniform(0.5, 3)])
    da = rng.uniform(0.5, 3)
    axis = unit([*rng.uniform(-0.3, 0.3, 2), 1.0])
    a = PatchGeometry(Ellipsoid(x, da), Cap(axis, rng.uniform(0.97, 0.995)))
    if blocking:
        p = a.ellipsoid.point(axis)
        q = x + rng.uniform(0.3, 0.7) * (p - x)
        db = float(focal_parameter_through(q[None], x)[0])
        b = PatchGeometry(Ellipsoid(x, db), Cap(unit(q), 0.9995))
    else:
        # rotate the cap well away so no ray from x meets both patches
        other = unit([-axis[0] + 0.9, -axis[1], 1.0])
        b = PatchGeometry(Ellipsoid(x, da * rng.uniform(0.5, 1.5)), Cap(other, 0.999))
    return a, b, x



@pytest.fixture(scope="session")
def rot_sym_design():
    g = Uniform(support=Cap(ZHAT, 0.7))
    mu = cap_mass(g, ZHAT, 0.7)
    r, F = design_rot_sym(0.7, 1.0, 1.0, [Ring(1, 2.0, -0.6, 0.6 * mu), Ring(4, 3.0, -0.5, 0.4 * mu)], g,
                          CarveParams(seed=7))
    return r, F, g


@pytest.fixture(scope="session")
def shadow_pair():
    """Low inner cap aimed down the axis; tall outer band aimed across it."""
    a = make_patch([0, 0, -1.0], 0.5, Cap(ZHAT, 0.95), 0)
    b = make_patch([-3.0, 0, -1.0], 3.0, Band(ZHAT, 0.8, 0.95), 1)
    return GeneralizedReflector([a, b], Cap(ZHAT, 0.8)), Uniform(support=Cap(ZHAT, 0.8))


@pytest.fixture(scope="session")
def blocking_pair():
    """A thin ring patch placed across the chords from another patch to its target."""
    x = np.array([0.0, 0.0, -2.0])
    a = make_patch(x, 1.5, Cap(ZHAT, 0.95), 1)
    p0 = a.ellipsoid.point(np.array([[0.0, 0.0, 1.0]]))[0]
    c = p0 + 0.3 * (x - p0)
    xb = np.array([2.0, 0.0, -2.0])
    db = float(focal_parameter_through(c[None], xb)[0])
    b = make_patch(xb, db, Band(ZHAT, 0.995, 0.9995), 0)
    return GeneralizedReflector([a, b], Cap(ZHAT, 0.95)), a, b, c


ACCEPTANCE = []


def record(tag, ok, detail):
    """Log one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append(f"{tag} {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE[-1])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
