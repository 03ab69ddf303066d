import numpy as np
import pytest
from hypothesis import given, strategies as st

from hemoswarm.bloodgas import (
    VDW_A_O2,
    VDW_B_O2,
    HillCurve,
    gas_state,
    saturation,
    saturation_slope,
    vdw_density,
)
from hemoswarm.params import ATM, AVOGADRO, GAS_CONSTANT, PhysiologyParams

# reference values from an independent 40-digit mpmath evaluation
S_LUNG = 0.958533044754741
CMAX_SLOPE_LUNG = 15.3311580776366
CMAX_SLOPE_VENOUS = 96.7723468812915
VDW_1000_ATM = 1.260247965635495e28
VDW_1437E8_PA = 1.374637780708613e28

curve = HillCurve.from_params(PhysiologyParams())
concs = st.floats(min_value=1e18, max_value=5e23, allow_nan=False)


def test_half_saturation():
    assert saturation(curve, curve.c_half) == pytest.approx(0.5, rel=1e-14)


def test_lung_saturation():
    assert saturation(curve, 7e22) == pytest.approx(S_LUNG, rel=1e-12)


def test_buffer_slope_values():
    assert 1e25 * saturation_slope(curve, 7e22) == pytest.approx(CMAX_SLOPE_LUNG, rel=1e-10)
    assert 1e25 * saturation_slope(curve, 0.5e22) == pytest.approx(CMAX_SLOPE_VENOUS, rel=1e-10)


def test_zero_and_negative_concentration():
    assert saturation(curve, 0.0) == 0.0
    assert saturation_slope(curve, 0.0) == 0.0
    assert saturation(curve, -1e20) == 0.0


def test_vectorized():
    c = np.array([0.0, curve.c_half, 7e22])
    s = saturation(curve, c)
    assert isinstance(s, np.ndarray) and s.shape == (3,)
    assert s[1] == pytest.approx(0.5)


@given(concs)
def test_saturation_in_unit_interval(c):
    assert 0.0 <= saturation(curve, c) <= 1.0


@given(concs, concs)
def test_saturation_monotone(a, b):
    lo, hi = sorted((a, b))
    assert saturation(curve, lo) <= saturation(curve, hi)


@given(st.floats(min_value=1e20, max_value=2e23))
def test_slope_matches_central_difference(c):
    h = c * 1e-5
    fd = (saturation(curve, c + h) - saturation(curve, c - h)) / (2 * h)
    assert saturation_slope(curve, c) == pytest.approx(fd, rel=1e-6)


def test_hill_validation():
    with pytest.raises(ValueError):
        HillCurve(0.0, 2.7)
    with pytest.raises(ValueError):
        HillCurve(1e22, 1.0)


def test_vdw_reference_points():
    assert vdw_density(1000 * ATM) == pytest.approx(VDW_1000_ATM, rel=1e-9)
    assert vdw_density(1.437e8) == pytest.approx(VDW_1437E8_PA, rel=1e-9)


@pytest.mark.parametrize("p", [10.0, 1000.0, ATM])
def test_vdw_low_pressure_is_ideal(p):
    assert vdw_density(p) == pytest.approx(p / (GAS_CONSTANT * 310.0) * AVOGADRO, rel=1e-3)


@given(st.floats(min_value=1e3, max_value=1e9), st.floats(min_value=200, max_value=600))
def test_vdw_root_satisfies_equation(p, t):
    n = vdw_density(p, t) / AVOGADRO
    assert 0 < n < 1 / VDW_B_O2
    lhs = (p + VDW_A_O2 * n * n) * (1 / n - VDW_B_O2)
    assert lhs == pytest.approx(GAS_CONSTANT * t, rel=1e-9)


@given(st.floats(min_value=1e3, max_value=1e9), st.floats(min_value=1e3, max_value=1e9))
def test_vdw_monotone_in_pressure(a, b):
    lo, hi = sorted((a, b))
    assert vdw_density(lo) <= vdw_density(hi)


def test_vdw_rejects_bad_input():
    with pytest.raises(ValueError):
        vdw_density(0.0)
    with pytest.raises(ValueError):
        vdw_density(1e5, -1.0)


def test_gas_state():
    g = gas_state(1000 * ATM)
    assert g.temperature == 310.0 and g.number_density == pytest.approx(VDW_1000_ATM, rel=1e-9)
