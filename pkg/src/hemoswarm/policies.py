"""Power-limiting strategies for robot swarms and the data-collection Markov model.

A policy turns the power a robot could draw at its current location into a
multiplier in [0, 1] on its oxygen consumption. Duty-cycle and history-based
strategies act at the swarm level as a uniform active fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .params import ConfigError


@dataclass(frozen=True)
class Unlimited:
    pass


@dataclass(frozen=True)
class FixedCap:
    power: float  # W

    def __post_init__(self):
        if not self.power >= 0:
            raise ConfigError("policy.power", "must be >= 0")


@dataclass(frozen=True)
class Fraction:
    fraction: float

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ConfigError("policy.fraction", "must lie in [0, 1]")


@dataclass(frozen=True)
class DutyCycle:
    active_fraction: float

    def __post_init__(self):
        if not 0 <= self.active_fraction <= 1:
            raise ConfigError("policy.active_fraction", "must lie in [0, 1]")


@dataclass(frozen=True)
class HistoryEffective:
    effective_fraction: float

    def __post_init__(self):
        if not 0 <= self.effective_fraction <= 1:
            raise ConfigError("policy.effective_fraction", "must lie in [0, 1]")


@dataclass(frozen=True)
class NearWallOff:
    """No consumption within ``band`` of the vessel wall."""

    band: float = 0.3e-3

    def __post_init__(self):
        if not self.band >= 0:
            raise ConfigError("policy.band", "must be >= 0")


RULE_KEYS = ("cap", "fraction")


@dataclass(frozen=True)
class PerVesselKind:
    """Rules keyed by vessel kind or by circuit region.

    Each rule is ``{"cap": watts}`` or ``{"fraction": q}``. Lookup tries the
    segment kind first, then its region (``arterial``, ``capillary``,
    ``venous``); locations with no rule are unlimited.
    """

    rules: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for key, rule in self.rules.items():
            if not isinstance(rule, Mapping) or len(rule) != 1 or next(iter(rule)) not in RULE_KEYS:
                raise ConfigError(f"policy.rules.{key}", "must be {\"cap\": W} or {\"fraction\": q}")
            name, value = next(iter(rule.items()))
            if name == "cap" and not value >= 0:
                raise ConfigError(f"policy.rules.{key}.cap", "must be >= 0")
            if name == "fraction" and not 0 <= value <= 1:
                raise ConfigError(f"policy.rules.{key}.fraction", "must lie in [0, 1]")

    def rule_for(self, kind: str, region: str | None = None) -> Mapping[str, float] | None:
        if kind in self.rules:
            return self.rules[kind]
        if region is not None and region in self.rules:
            return self.rules[region]
        return None


PowerPolicy = Union[Unlimited, FixedCap, Fraction, PerVesselKind, DutyCycle, HistoryEffective, NearWallOff]


def _cap_multiplier(cap: float, unlimited_power: float) -> float:
    if unlimited_power <= cap:
        return 1.0
    return cap / unlimited_power


def apply_policy(
    policy: PowerPolicy,
    kind: str,
    unlimited_power: float,
    region: str | None = None,
    vessel_radius: float | None = None,
) -> float:
    """Consumption multiplier in [0, 1] for a robot at the given location.

    ``unlimited_power`` is what the robot would draw absorbing everything that
    reaches it. For NearWallOff in a cross-section averaged model the
    multiplier is the area fraction of the core outside the band, which needs
    ``vessel_radius``.
    """
    if isinstance(policy, Unlimited):
        return 1.0
    if isinstance(policy, FixedCap):
        return _cap_multiplier(policy.power, unlimited_power)
    if isinstance(policy, Fraction):
        return policy.fraction
    if isinstance(policy, DutyCycle):
        return policy.active_fraction
    if isinstance(policy, HistoryEffective):
        return policy.effective_fraction
    if isinstance(policy, PerVesselKind):
        rule = policy.rule_for(kind, region)
        if rule is None:
            return 1.0
        if "cap" in rule:
            return _cap_multiplier(rule["cap"], unlimited_power)
        return rule["fraction"]
    if isinstance(policy, NearWallOff):
        if vessel_radius is None:
            raise ValueError("NearWallOff needs the vessel radius")
        core = max(0.0, 1.0 - policy.band / vessel_radius)
        return core * core
    raise TypeError(f"unknown policy {policy!r}")


def group_absorption_factor(n_group: int) -> float:
    """Per-robot absorption in a compact group of n, relative to an isolated robot."""
    if n_group < 1:
        raise ValueError("group size must be >= 1")
    return float(n_group) ** (-2.0 / 3.0)


# --------------------------------------------------------------------------
# policy <-> JSON


def policy_from_dict(data: Mapping) -> PowerPolicy:
    if not isinstance(data, Mapping):
        raise ConfigError("policy", "must be a JSON object")
    kind = data.get("type")
    params = {k: v for k, v in data.items() if k != "type"}
    expected = {
        "unlimited": (Unlimited, ()),
        "fixed_cap": (FixedCap, ("power",)),
        "fraction": (Fraction, ("fraction",)),
        "duty_cycle": (DutyCycle, ("active_fraction",)),
        "history": (HistoryEffective, ("effective_fraction",)),
        "near_wall_off": (NearWallOff, ("band",)),
        "per_vessel_kind": (PerVesselKind, ("rules",)),
    }
    if kind not in expected:
        raise ConfigError("policy.type", f"must be one of {', '.join(expected)}")
    cls, allowed = expected[kind]
    for key in params:
        if key not in allowed:
            raise ConfigError(f"policy.{key}", "unknown key")
    if cls is PerVesselKind:
        rules = params.get("rules", {})
        if not isinstance(rules, Mapping):
            raise ConfigError("policy.rules", "must be a JSON object")
        return PerVesselKind({k: dict(v) if isinstance(v, Mapping) else v for k, v in rules.items()})
    for key, value in params.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"policy.{key}", "must be a number")
    missing = [k for k in allowed if k not in params and k != "band"]
    if missing:
        raise ConfigError(f"policy.{missing[0]}", "missing")
    return cls(**{k: float(v) for k, v in params.items()})


def policy_to_dict(policy: PowerPolicy) -> dict:
    if isinstance(policy, Unlimited):
        return {"type": "unlimited"}
    if isinstance(policy, FixedCap):
        return {"type": "fixed_cap", "power": policy.power}
    if isinstance(policy, Fraction):
        return {"type": "fraction", "fraction": policy.fraction}
    if isinstance(policy, DutyCycle):
        return {"type": "duty_cycle", "active_fraction": policy.active_fraction}
    if isinstance(policy, HistoryEffective):
        return {"type": "history", "effective_fraction": policy.effective_fraction}
    if isinstance(policy, NearWallOff):
        return {"type": "near_wall_off", "band": policy.band}
    if isinstance(policy, PerVesselKind):
        return {"type": "per_vessel_kind", "rules": {k: dict(v) for k, v in sorted(policy.rules.items())}}
    raise TypeError(f"unknown policy {policy!r}")


# --------------------------------------------------------------------------
# data-collection Markov chain


@dataclass(frozen=True)
class MarkovDataModel:
    """Stored measurements per robot, updated once per circulation.

    A skin loop transmits up to ``transmit_limit`` measurements and collects
    nothing; a portal loop collects two; any other loop collects one. Storage
    saturates at ``capacity``.
    """

    capacity: int = 5
    transmit_limit: int = 3
    p_skin: float = 0.08
    p_portal: float = 0.20

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError("scenario.markov.capacity", "must be >= 1")
        if not 0 <= self.transmit_limit <= self.capacity:
            raise ConfigError("scenario.markov.transmit_limit", "must lie in [0, capacity]")
        if not (0 <= self.p_skin <= 1 and 0 <= self.p_portal <= 1 and self.p_skin + self.p_portal <= 1):
            raise ConfigError("scenario.markov", "loop probabilities must be in [0, 1] and sum to at most 1")

    @property
    def p_other(self) -> float:
        return 1.0 - self.p_skin - self.p_portal

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic matrix over stored counts 0..capacity."""
        n = self.capacity + 1
        T = np.zeros((n, n))
        for s in range(n):
            T[s, s - min(s, self.transmit_limit)] += self.p_skin
            T[s, min(s + 2, self.capacity)] += self.p_portal
            T[s, min(s + 1, self.capacity)] += self.p_other
        return T


@dataclass(frozen=True)
class MarkovResult:
    distribution: np.ndarray
    residual: float
    iterations: int
    full_fraction: float
    # among robots arriving at the skin, chance they hold at least transmit_limit
    skin_at_limit: float


def markov_stationary(model: MarkovDataModel, tol: float = 1e-12, max_iter: int = 1_000_000) -> MarkovResult:
    T = model.transition_matrix()
    if np.any(T < 0) or not np.allclose(T.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("transition matrix is not stochastic")
    pi = np.full(T.shape[0], 1.0 / T.shape[0])
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = pi @ T
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual <= tol:
            break
    else:
        raise RuntimeError(f"power iteration did not converge (residual {residual:.3g})")
    # arrivals at the skin are a p_skin-thinned sample of the stationary mix
    at_limit = float(pi[model.transmit_limit :].sum())
    return MarkovResult(pi, residual, it, float(pi[-1]), at_limit)


def effective_active_fraction(result: MarkovResult | float) -> float:
    """Fraction of robots still drawing full power: those without full storage."""
    full = result.full_fraction if isinstance(result, MarkovResult) else float(result)
    if not 0 <= full <= 1:
        raise ValueError("full-storage fraction must lie in [0, 1]")
    return 1.0 - full
