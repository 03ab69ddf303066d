import math

import pytest
from hypothesis import given, strategies as st

from hemoswarm.params import (
    ConfigError,
    PhysiologyParams,
    RobotSpec,
    concentration_to_micromolar,
    concentration_to_partial_pressure,
    parse_config,
    partial_pressure_to_concentration,
    scenario_metrics,
)


def test_defaults_derived_quantities():
    p = PhysiologyParams()
    assert p.energy_per_o2 == pytest.approx(4e-18 / 6)
    assert p.c_half == pytest.approx(2.1875e22, rel=1e-12)
    assert p.tissue_volume_ratio == pytest.approx(99.0)


def test_lung_concentration_is_about_116_micromolar():
    # 7e22 /m^3 / N_A = 0.1162 mol/m^3
    assert concentration_to_micromolar(7e22) == pytest.approx(116.24, abs=0.01)


def test_henry_roundtrip_known_point():
    assert concentration_to_partial_pressure(7e22) == pytest.approx(11200.0)
    assert partial_pressure_to_concentration(3500.0) == pytest.approx(2.1875e22)


@given(st.floats(min_value=0, max_value=1e24, allow_nan=False))
def test_henry_roundtrip(c):
    back = partial_pressure_to_concentration(concentration_to_partial_pressure(c))
    assert back == pytest.approx(c, rel=1e-12, abs=1e-300)


def test_negative_concentration_rejected():
    with pytest.raises(ValueError):
        concentration_to_partial_pressure(-1.0)
    with pytest.raises(ValueError):
        partial_pressure_to_concentration(-1.0)


@pytest.mark.parametrize("field,value", [
    ("overall_hematocrit", 1.0),
    ("overall_hematocrit", 0.0),
    ("blood_volume", 0.0),
    ("o2_diffusion", -1.0),
    ("tissue_cylinder_radius", 3e-6),
    ("cell_o2_max", -1.0),
])
def test_physiology_validation(field, value):
    with pytest.raises(ConfigError):
        PhysiologyParams(**{field: value})


def test_zero_cell_oxygen_allowed():
    assert PhysiologyParams(cell_o2_max=0.0).cell_o2_max == 0.0


@pytest.mark.parametrize("field,value", [
    ("radius", 0.0),
    ("fuel_cell_efficiency", 0.0),
    ("fuel_cell_efficiency", 1.5),
    ("count", -1.0),
])
def test_robot_validation(field, value):
    with pytest.raises(ConfigError):
        RobotSpec(**{field: value})


def test_scenario_metrics_values():
    p = PhysiologyParams()
    m = scenario_metrics(RobotSpec(count=1e12), p)
    vol = 4 / 3 * math.pi * 1e-18
    assert m["nanocrit"] == pytest.approx(1e12 * vol / 5.4e-3)
    assert m["number_density"] == pytest.approx(1e12 / 5.4e-3)
    assert m["spacing_large_vessel"] == pytest.approx((5.4e-3 / 1e12) ** (1 / 3))
    assert m["spacing_body"] == pytest.approx((50e-3 / 1e12) ** (1 / 3))
    assert m["spacing_capillary"] == pytest.approx(5.4e-3 / 1e12 / (math.pi * 16e-12))


def test_scenario_metrics_sparse_capillary_is_none():
    m = scenario_metrics(RobotSpec(count=1e10), PhysiologyParams())
    assert m["spacing_capillary"] is None
    empty = scenario_metrics(RobotSpec(count=0), PhysiologyParams())
    assert empty["nanocrit"] == 0 and empty["spacing_large_vessel"] is None


@given(st.floats(min_value=1e6, max_value=1e14), st.floats(min_value=1e6, max_value=1e14))
def test_nanocrit_monotone_in_count(a, b):
    p = PhysiologyParams()
    lo, hi = sorted((a, b))
    assert scenario_metrics(RobotSpec(count=lo), p)["nanocrit"] <= scenario_metrics(RobotSpec(count=hi), p)["nanocrit"]


def _raw(**scen):
    return {"scenario": {"kind": "circulating", **scen}}


def test_parse_minimal_config():
    cfg = parse_config(_raw(counts=[1e10]))
    assert cfg.scenario_kind == "circulating"
    assert cfg.scenario_id == "circulating"
    assert not cfg.robot_count_set


@pytest.mark.parametrize("raw,key", [
    ({"scenario": {"kind": "circulating"}, "bogus": 1}, "bogus"),
    ({"scenario": {"kind": "nope"}}, "scenario.kind"),
    ({"scenario": {"kind": "circulating"}, "physiology": {"hill_p_half": "x"}}, "physiology.hill_p_half"),
    ({"scenario": {"kind": "circulating"}, "physiology": {"unknown": 1}}, "physiology.unknown"),
    ({"scenario": {"kind": "circulating", "vessel": {}}}, "scenario.vessel"),
    ({"scenario": {"kind": "circulating", "counts": []}}, "scenario.counts"),
    ({"scenario": {"kind": "circulating", "capillary_transit_time": -1}}, "scenario.capillary_transit_time"),
    ({"scenario": {"kind": "wall_depletion", "vessel": {"radius": "big"}}}, "scenario.vessel.radius"),
    ({}, "scenario"),
])
def test_config_errors_name_the_key(raw, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert exc.value.key == key


@given(st.floats(min_value=1e6, max_value=1e14))
def test_spacing_scales_as_inverse_cube_root(n):
    p = PhysiologyParams()
    one = scenario_metrics(RobotSpec(count=n), p)
    two = scenario_metrics(RobotSpec(count=2 * n), p)
    ratio = 2 ** (1 / 3)
    assert one["spacing_large_vessel"] / two["spacing_large_vessel"] == pytest.approx(ratio, rel=1e-12)
    assert one["spacing_body"] / two["spacing_body"] == pytest.approx(ratio, rel=1e-12)


@given(st.floats(min_value=0, max_value=1e23), st.floats(min_value=0, max_value=1e23))
def test_henry_is_linear(a, b):
    s = concentration_to_partial_pressure(a + b)
    assert s == pytest.approx(concentration_to_partial_pressure(a) + concentration_to_partial_pressure(b), rel=1e-12)


def test_default_values_are_the_tabulated_literals():
    p = PhysiologyParams()
    assert (p.capillary_radius, p.tissue_cylinder_radius, p.overall_hematocrit) == (4e-6, 40e-6, 0.45)
    assert (p.blood_volume, p.circulation_time) == (5.4e-3, 60.0)
    assert (p.tissue_power_max, p.tissue_half_concentration, p.glucose_reaction_energy) == (4e3, 1e21, 4e-18)
    assert (p.hill_p_half, p.hill_exponent, p.cell_o2_max) == (3500.0, 2.7, 1e25)
    assert (p.o2_diffusion, p.o2_lung_concentration, p.henry_ratio) == (2e-9, 7e22, 1.6e-19)
    r = RobotSpec()
    assert (r.radius, r.fuel_cell_efficiency, r.pump_max_flux) == (1e-6, 0.5, 1e22)
