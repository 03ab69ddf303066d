import numpy as np
import pytest

from hemoswarm.params import PhysiologyParams
from hemoswarm.policies import FixedCap, Fraction, NearWallOff, Unlimited
from hemoswarm.walldepletion import (
    VesselCase,
    axial_stations,
    default_cases,
    read_dump,
    solve_vessel,
    vessel_peclet,
    wall_trace_compare,
    wall_value,
)


@pytest.fixture(scope="module")
def comparison():
    return wall_trace_compare()


def test_peclet():
    assert vessel_peclet(VesselCase()) == pytest.approx(2500.0)


def test_labels():
    assert [c.label() for c in default_cases()] == ["unlimited", "near_wall_off", "fraction"]


def test_ordering(comparison):
    full = comparison.curves["unlimited"][1:]
    half = comparison.curves["fraction"][1:]
    wall = comparison.curves["near_wall_off"][1:]
    assert np.all(wall >= half) and np.all(half >= full)


def test_traces_monotone(comparison):
    # allow round-off where the wall has not yet felt any uptake
    for curve in comparison.curves.values():
        assert np.all(np.diff(curve) <= 1e-12 * 0.5e22)


def test_no_sink_leaves_field_unchanged():
    sol = solve_vessel(VesselCase(robot_count=0.0, n_r=32, n_x=16))
    assert np.allclose(sol.c, 0.5e22, rtol=1e-12)


def test_slab_mass_balance():
    sol = solve_vessel(VesselCase(n_r=64, n_x=64))
    flux = sol.flux()
    dx = np.diff(sol.x)
    sink = sol.uptake()[1:] * dx
    assert np.allclose(flux[:-1] - flux[1:], sink, rtol=1e-3)


def test_grid_convergence(comparison):
    fine = wall_trace_compare(default_cases(n_r=512, n_x=1024))
    for name, coarse in comparison.curves.items():
        # fine stations at even indices coincide with the coarse ones
        diff = np.max(np.abs(fine.curves[name][::2] - coarse))
        assert diff / 0.5e22 < 0.01


def test_wall_value_exact_for_flat_gradient():
    # a profile c = a + b (r - R)^2 has zero wall gradient; the extrapolation recovers a
    n = 16
    dr = 1.0 / n
    r = (np.arange(n) + 0.5) * dr
    c = 3.0 + 2.0 * (r - 1.0) ** 2
    assert wall_value(c) == pytest.approx(3.0)


def test_axial_grid_clusters_at_inlet():
    x = axial_stations(VesselCase(n_x=10))
    assert x[0] == 0 and x[-1] == pytest.approx(4e-2)
    assert np.all(np.diff(np.diff(x)) > 0)


def test_dump_roundtrip(tmp_path):
    sol = solve_vessel(VesselCase(n_r=8, n_x=4))
    path = tmp_path / "field.bin"
    sol.dump(path)
    raw = path.read_bytes()
    assert len(raw) == 16 + 8 * 8 * 5
    assert np.array_equal(read_dump(path), sol.c)


def test_csv_layout(comparison):
    lines = comparison.to_csv().splitlines()
    assert lines[0] == "x_m,policy,c_wall"
    assert len(lines) == 1 + 3 * len(comparison.x)


@pytest.mark.parametrize("kw", [
    {"radius": 0.0},
    {"policy": NearWallOff(2e-3)},
    {"n_r": 2},
    {"x_stretch": 0.5},
    {"inlet_concentration": -1.0},
])
def test_case_validation(kw):
    with pytest.raises(ValueError):
        VesselCase(**kw)


def test_unsupported_policy():
    with pytest.raises(ValueError):
        solve_vessel(VesselCase(policy=FixedCap(1e-12), n_r=8, n_x=4))


def test_mismatched_grids_rejected():
    with pytest.raises(ValueError):
        wall_trace_compare([VesselCase(n_r=8, n_x=4), VesselCase(n_r=16, n_x=4, policy=Fraction(0.5))])


def test_axisymmetric_field_shape():
    sol = solve_vessel(VesselCase(n_r=16, n_x=8))
    assert sol.c.shape == (16, 9)
    assert sol.wall.shape == (9,)
