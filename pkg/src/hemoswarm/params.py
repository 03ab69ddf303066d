"""Physical constants, physiological parameters, robot specs and scenario config.

Everything inside the package is SI (m, s, J, W, molecule/m^3). mmHg, atm and
micromolar only appear at I/O boundaries through the constants below.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

ATM = 101325.0  # Pa
MMHG = 133.322  # Pa
AVOGADRO = 6.02214076e23  # 1/mol
BOLTZMANN = 1.380649e-23  # J/K
GAS_CONSTANT = AVOGADRO * BOLTZMANN  # J/(mol K)
BODY_TEMPERATURE = 310.0  # K
BODY_VOLUME = 50e-3  # m^3, nominal body volume for the "body spacing" metric
MICRON = 1e-6
PICOWATT = 1e-12

SCENARIO_KINDS = ("circulating", "capillary_resident", "wall_depletion", "storage_design", "markov")


class ConfigError(ValueError):
    """Invalid scenario configuration. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PhysiologyParams:
    capillary_radius: float = 4e-6
    tissue_cylinder_radius: float = 40e-6
    overall_hematocrit: float = 0.45
    blood_volume: float = 5.4e-3
    circulation_time: float = 60.0
    tissue_power_max: float = 4e3
    tissue_half_concentration: float = 1e21
    glucose_reaction_energy: float = 4e-18
    hill_p_half: float = 3500.0
    hill_exponent: float = 2.7
    cell_o2_max: float = 1e25
    o2_diffusion: float = 2e-9
    o2_lung_concentration: float = 7e22
    henry_ratio: float = 1.6e-19

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            # cell_o2_max = 0 is allowed: it switches off red-cell buffering
            if f.name == "cell_o2_max":
                if value < 0:
                    raise ConfigError(f"physiology.{f.name}", "must be >= 0")
            elif not value > 0:
                raise ConfigError(f"physiology.{f.name}", "must be > 0")
        if not 0 < self.overall_hematocrit < 1:
            raise ConfigError("physiology.overall_hematocrit", "must lie in (0, 1)")
        if self.tissue_cylinder_radius <= self.capillary_radius:
            raise ConfigError("physiology.tissue_cylinder_radius", "must exceed capillary_radius")

    @property
    def energy_per_o2(self) -> float:
        """Reaction energy released per oxygen molecule consumed (J)."""
        return self.glucose_reaction_energy / 6.0

    @property
    def c_half(self) -> float:
        return self.hill_p_half / self.henry_ratio

    @property
    def tissue_volume_ratio(self) -> float:
        """Krogh cylinder tissue volume per unit capillary volume."""
        return (self.tissue_cylinder_radius / self.capillary_radius) ** 2 - 1.0

    def with_overrides(self, **kwargs) -> "PhysiologyParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class RobotSpec:
    radius: float = 1e-6
    fuel_cell_efficiency: float = 0.5
    count: float = 0.0
    pump_max_flux: float = 1e22
    pump_unit_size: float = 10e-9
    min_component_volume: float = 0.1e-18

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("robots.radius", "must be > 0")
        if not 0 < self.fuel_cell_efficiency <= 1:
            raise ConfigError("robots.fuel_cell_efficiency", "must lie in (0, 1]")
        if self.count < 0:
            raise ConfigError("robots.count", "must be >= 0")
        if not self.pump_max_flux > 0:
            raise ConfigError("robots.pump_max_flux", "must be > 0")
        if not self.pump_unit_size > 0:
            raise ConfigError("robots.pump_unit_size", "must be > 0")
        if self.min_component_volume < 0:
            raise ConfigError("robots.min_component_volume", "must be >= 0")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    def with_count(self, count: float) -> "RobotSpec":
        return replace(self, count=float(count))


def default_params() -> PhysiologyParams:
    return PhysiologyParams()


def concentration_to_partial_pressure(c: float, phys: PhysiologyParams | None = None) -> float:
    """Henry's law: equivalent O2 partial pressure (Pa) of a plasma concentration."""
    if c < 0:
        raise ValueError("concentration must be non-negative")
    h = (phys or default_params()).henry_ratio
    return h * c


def partial_pressure_to_concentration(p: float, phys: PhysiologyParams | None = None) -> float:
    if p < 0:
        raise ValueError("pressure must be non-negative")
    h = (phys or default_params()).henry_ratio
    return p / h


def concentration_to_micromolar(c: float) -> float:
    return c / AVOGADRO * 1e3  # mol/m^3 is mM


def scenario_metrics(robots: RobotSpec, phys: PhysiologyParams) -> dict[str, float | None]:
    """Nanocrit, number density and typical spacings for a robot population.

    Spacings are cube roots of the volume per robot. The capillary spacing is
    the length of an 8 um capillary holding that volume, reported only when
    it fits inside a 1 mm capillary (otherwise ``None``).
    """
    n = robots.count
    density = n / phys.blood_volume
    out: dict[str, float | None] = {
        "count": n,
        "nanocrit": n * robots.volume / phys.blood_volume,
        "number_density": density,
        "spacing_large_vessel": None,
        "spacing_capillary": None,
        "spacing_body": None,
    }
    if n > 0:
        out["spacing_large_vessel"] = density ** (-1.0 / 3.0)
        out["spacing_body"] = (n / BODY_VOLUME) ** (-1.0 / 3.0)
        cap_len = (1.0 / density) / (math.pi * phys.capillary_radius**2)
        out["spacing_capillary"] = cap_len if cap_len <= 1e-3 else None
    return out


# --------------------------------------------------------------------------
# scenario configuration

_TOP_KEYS = {"physiology", "robots", "policy", "scenario", "output"}
_SCENARIO_KEYS = {
    "kind",
    "id",
    "counts",
    "capillary_transit_time",
    "capillary_speed",
    "capillary_length",
    "sample_step",
    "transport",
    "reservoir",
    "markov",
    "vessel",
}
_OUTPUT_KEYS = {"dir", "trace"}
_KIND_OPTIONS = {
    "circulating": {"counts", "capillary_transit_time", "capillary_length", "sample_step"},
    "capillary_resident": {"counts", "capillary_speed", "capillary_length"},
    "wall_depletion": {"vessel"},
    "storage_design": {"transport", "reservoir"},
    "markov": {"markov"},
}
_POSITIVE_OPTIONS = ("capillary_transit_time", "capillary_speed", "capillary_length", "sample_step")
_SUBSECTIONS = {
    "vessel": {"radius", "length", "mean_speed", "inlet_concentration", "n_r", "n_x", "band", "fraction"},
    "markov": {"capacity", "transmit_limit", "p_skin", "p_portal"},
    "transport": {"target_molecules", "supply_duration", "own_power", "reserve_power", "fill_window", "n_r", "n_f"},
    "reservoir": {"robots", "power", "window", "robot_radius", "storage_fraction", "wall_thickness", "own_power"},
}


@dataclass(frozen=True)
class ScenarioConfig:
    physiology: PhysiologyParams
    robots: RobotSpec
    policy: Any  # policies.PowerPolicy; typed loosely to avoid an import cycle
    scenario_kind: str
    scenario_id: str = "scenario"
    options: dict = field(default_factory=dict)
    circuit_dataset: Path | None = None
    output_dir: Path | None = None
    write_trace: bool = True
    robot_count_set: bool = False

    def echo(self) -> dict:
        from .policies import policy_to_dict

        return {
            "physiology": asdict(self.physiology),
            "robots": asdict(self.robots),
            "policy": policy_to_dict(self.policy),
            "scenario": {"kind": self.scenario_kind, "id": self.scenario_id, **self.options},
        }


def _check_keys(section: str, data: Any, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(section, "must be a JSON object")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}" if section else key, "unknown key")
    return data


def _dataclass_from(section: str, cls, data: dict):
    names = {f.name for f in fields(cls)}
    _check_keys(section, data, names)
    for key, value in data.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{section}.{key}", "must be a number")
    return cls(**{k: float(v) for k, v in data.items()})


def parse_config(raw: dict, base_dir: Path | None = None) -> ScenarioConfig:
    from .policies import policy_from_dict

    _check_keys("", raw, _TOP_KEYS)
    if "scenario" not in raw:
        raise ConfigError("scenario", "missing")
    scen = _check_keys("scenario", raw["scenario"], _SCENARIO_KEYS)
    kind = scen.get("kind")
    if kind not in SCENARIO_KINDS:
        raise ConfigError("scenario.kind", f"must be one of {', '.join(SCENARIO_KINDS)}")
    phys = _dataclass_from("physiology", PhysiologyParams, raw.get("physiology", {}))
    robots = _dataclass_from("robots", RobotSpec, raw.get("robots", {}))
    policy = policy_from_dict(raw.get("policy", {"type": "unlimited"}))

    for key in scen:
        if key not in ("kind", "id") and key not in _KIND_OPTIONS[kind]:
            raise ConfigError(f"scenario.{key}", f"not used by a {kind} scenario")
    for key in _POSITIVE_OPTIONS:
        if key in scen:
            value = scen[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
                raise ConfigError(f"scenario.{key}", "must be a positive number")
    for key, allowed in _SUBSECTIONS.items():
        if key in scen:
            sub = _check_keys(f"scenario.{key}", scen[key], allowed)
            for name, value in sub.items():
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise ConfigError(f"scenario.{key}.{name}", "must be a number")
    if "counts" in scen:
        counts = scen["counts"]
        ok = isinstance(counts, list) and counts and all(
            isinstance(c, (int, float)) and not isinstance(c, bool) and c >= 0 for c in counts)
        if not ok:
            raise ConfigError("scenario.counts", "must be a non-empty list of non-negative numbers")

    out = _check_keys("output", raw.get("output", {}), _OUTPUT_KEYS)
    out_dir = Path(out["dir"]) if "dir" in out else None
    if out_dir is not None and base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    options = {k: v for k, v in scen.items() if k not in ("kind", "id")}
    return ScenarioConfig(
        physiology=phys,
        robots=robots,
        policy=policy,
        scenario_kind=kind,
        scenario_id=str(scen.get("id", kind)),
        options=options,
        output_dir=out_dir,
        write_trace=bool(out.get("trace", True)),
        robot_count_set="count" in raw.get("robots", {}),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from exc
    return parse_config(raw, base_dir=path.parent)
