import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hemoswarm.params import ConfigError, RobotSpec
from hemoswarm.policies import (
    DutyCycle,
    FixedCap,
    Fraction,
    HistoryEffective,
    MarkovDataModel,
    NearWallOff,
    PerVesselKind,
    Unlimited,
    apply_policy,
    effective_active_fraction,
    group_absorption_factor,
    markov_stationary,
    policy_from_dict,
    policy_to_dict,
)
from hemoswarm.transport import integrate_loop

# eigenvector of the default chain, computed independently with mpmath
MARKOV_PI = [0.012663, 0.013595, 0.075180, 0.056849, 0.055967, 0.785746]


def test_apply_policy_basic():
    assert apply_policy(Unlimited(), "capillary", 1e-9) == 1.0
    assert apply_policy(FixedCap(100e-12), "capillary", 400e-12) == pytest.approx(0.25)
    assert apply_policy(FixedCap(100e-12), "capillary", 50e-12) == 1.0
    assert apply_policy(Fraction(0.3), "small_vein", 1e-9) == 0.3
    assert apply_policy(DutyCycle(0.4), "small_vein", 1e-9) == 0.4
    assert apply_policy(HistoryEffective(0.3), "small_vein", 1e-9) == 0.3
    assert apply_policy(NearWallOff(0.3e-3), "large_mixed", 1e-9, vessel_radius=1e-3) == pytest.approx(0.49)
    with pytest.raises(ValueError):
        apply_policy(NearWallOff(), "large_mixed", 1e-9)


def test_per_vessel_kind_lookup():
    pol = PerVesselKind({"capillary": {"cap": 200e-12}, "arterial": {"cap": 20e-12}, "small_vein": {"fraction": 0.5}})
    assert apply_policy(pol, "capillary", 400e-12, "capillary") == pytest.approx(0.5)
    assert apply_policy(pol, "small_artery", 40e-12, "arterial") == pytest.approx(0.5)
    # kind wins over region
    assert apply_policy(pol, "small_vein", 40e-12, "arterial") == 0.5
    assert apply_policy(pol, "large_mixed", 40e-12, "venous") == 1.0


@given(st.floats(min_value=0, max_value=1e-9), st.floats(min_value=0, max_value=1e-9))
def test_cap_multiplier_bounds(cap, p):
    m = apply_policy(FixedCap(cap), "capillary", p)
    assert 0 <= m <= 1
    assert m * p <= cap * (1 + 1e-12) or m == 1.0


@pytest.mark.parametrize("pol", [
    Unlimited(), FixedCap(5e-12), Fraction(0.25), DutyCycle(0.5), HistoryEffective(0.3), NearWallOff(1e-4),
    PerVesselKind({"capillary": {"cap": 2e-10}, "venous": {"fraction": 0.0}}),
])
def test_policy_json_roundtrip(pol):
    assert policy_from_dict(policy_to_dict(pol)) == pol


@pytest.mark.parametrize("data,key", [
    ({"type": "warp"}, "policy.type"),
    ({"type": "fixed_cap"}, "policy.power"),
    ({"type": "fixed_cap", "power": -1}, "policy.power"),
    ({"type": "fraction", "fraction": 2}, "policy.fraction"),
    ({"type": "fraction", "fraction": 0.5, "extra": 1}, "policy.extra"),
    ({"type": "per_vessel_kind", "rules": {"capillary": {"cap": 1, "fraction": 1}}}, "policy.rules.capillary"),
])
def test_policy_errors(data, key):
    with pytest.raises(ConfigError) as exc:
        policy_from_dict(data)
    assert exc.value.key == key


def test_group_absorption():
    assert group_absorption_factor(1) == 1.0
    assert group_absorption_factor(8) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        group_absorption_factor(0)


@pytest.mark.parametrize("pol", [
    FixedCap(50e-12), Fraction(0.5), DutyCycle(0.2),
    PerVesselKind({"arterial": {"cap": 20e-12}, "capillary": {"cap": 200e-12}}),
])
def test_weaker_policy_never_lowers_oxygen(circuit, phys, pol):
    spec = RobotSpec(count=1e12)
    base = integrate_loop(circuit, spec, Unlimited(), phys)
    lim = integrate_loop(circuit, spec, pol, phys)
    assert np.all(lim.c >= base.c * (1 - 1e-5) - 1e-6 * 7e22 * 1e-3)


def test_fixed_cap_respected(circuit, phys):
    tr = integrate_loop(circuit, RobotSpec(count=1e11), FixedCap(100e-12), phys)
    assert tr.power.max() <= 100e-12 * (1 + 1e-9)
    assert tr.avg_power <= 100e-12 * (1 + 1e-6)


@pytest.mark.parametrize("q,n", [(0.1, 1e12), (0.5, 1e11), (0.25, 4e10)])
def test_fraction_equivalent_to_fewer_robots(circuit, phys, q, n):
    a = integrate_loop(circuit, RobotSpec(count=n), Fraction(q), phys)
    b = integrate_loop(circuit, RobotSpec(count=q * n), Unlimited(), phys)
    scale = np.maximum(b.c, 1e-3 * 7e22)
    assert np.max(np.abs(a.c - b.c) / scale) <= 1e-3


def test_markov_distribution():
    res = markov_stationary(MarkovDataModel())
    assert np.allclose(res.distribution, MARKOV_PI, atol=2e-6)
    assert res.full_fraction == pytest.approx(0.785746, abs=2e-6)


def test_markov_matches_eigenvector():
    T = MarkovDataModel().transition_matrix()
    w, v = np.linalg.eig(T.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    assert np.allclose(markov_stationary(MarkovDataModel()).distribution, pi, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=1, max_value=8),
    st.data(),
    st.floats(min_value=0.01, max_value=0.5),
    st.floats(min_value=0.0, max_value=0.49),
)
def test_markov_stationarity(cap, data, p_skin, p_portal):
    limit = data.draw(st.integers(min_value=1, max_value=cap))
    model = MarkovDataModel(cap, limit, p_skin, p_portal)
    res = markov_stationary(model)
    pi = res.distribution
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pi >= 0)
    assert np.abs(pi @ model.transition_matrix() - pi).sum() <= 1e-10


def test_markov_rows_stochastic():
    T = MarkovDataModel().transition_matrix()
    assert np.allclose(T.sum(axis=1), 1.0)


def test_markov_validation():
    with pytest.raises(ConfigError):
        MarkovDataModel(capacity=0)
    with pytest.raises(ConfigError):
        MarkovDataModel(p_skin=0.9, p_portal=0.2)


def test_effective_fraction():
    assert effective_active_fraction(0.7) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        effective_active_fraction(1.5)
