"""Onboard oxygen storage: pressure tanks, pumps, transport robots and reservoirs.

Tanks are thin spherical shells filled in lung capillaries, where a robot
absorbs at the diffusion-limited rate 4*pi*D*r*c. Storage pressure is a fixed
fraction of the Laplace-law burst limit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .bloodgas import vdw_density
from .params import BODY_TEMPERATURE, PhysiologyParams, RobotSpec
from .transport import robot_absorption_rate

WALL_STRENGTH = 1e10  # Pa
MIN_WALL = 1e-9  # one atomic layer
PUMP_OVERHEAD = 0.03
LUNG_TRANSIT = 0.75  # s
MAIN_ROBOT_RADIUS = 1e-6


def max_tank_pressure(t: float, sigma: float, r_tank: float) -> float:
    """Laplace's law for a thin spherical shell."""
    if not t > 0:
        raise ValueError("wall thickness must be positive")
    if t >= r_tank:
        raise ValueError("wall thickness must be smaller than the tank radius")
    return 2.0 * t * sigma / r_tank


class PumpCoverage(NamedTuple):
    fraction: float
    raw: float
    infeasible: bool  # molecules arrive faster than a fully covered surface can pump


def pump_surface_fraction(
    r: float,
    c: float,
    phys: PhysiologyParams | None = None,
    pump_max_flux: float = 1e22,
    floor: float = 0.05,
    ceiling: float = 1.0,
) -> PumpCoverage:
    if not r > 0:
        raise ValueError("radius must be positive")
    D = (phys or PhysiologyParams()).o2_diffusion
    raw = D * c / (pump_max_flux * r)
    return PumpCoverage(min(max(raw, floor), ceiling), raw, raw > ceiling)


@dataclass(frozen=True)
class TankDesign:
    """Spherical tank inside a robot of radius ``robot_radius``.

    With ``basis="exterior"`` the tank including its wall fills the fraction
    ``storage_fraction`` of the robot volume; with ``basis="interior"`` that
    fraction is the gas volume and the wall sits outside it.
    """

    robot_radius: float
    storage_fraction: float
    wall_thickness: float
    wall_strength: float = WALL_STRENGTH
    fill_pressure_ratio: float = 1.0 / 3.0
    basis: str = "exterior"

    def __post_init__(self):
        if not self.robot_radius > 0:
            raise ValueError("robot radius must be positive")
        if not 0 < self.storage_fraction < 1:
            raise ValueError("storage fraction must lie in (0, 1)")
        if self.wall_thickness < MIN_WALL * (1 - 1e-9):
            raise ValueError("wall cannot be thinner than one atomic layer (1 nm)")
        if not 0 < self.fill_pressure_ratio <= 1:
            raise ValueError("fill pressure must lie in (0, max pressure]")
        if self.basis not in ("exterior", "interior"):
            raise ValueError("basis must be 'exterior' or 'interior'")

    @property
    def _scaled_radius(self) -> float:
        return self.storage_fraction ** (1.0 / 3.0) * self.robot_radius

    @property
    def interior_radius(self) -> float:
        if self.basis == "interior":
            return self._scaled_radius
        return self._scaled_radius - self.wall_thickness

    @property
    def exterior_radius(self) -> float:
        if self.basis == "interior":
            return self._scaled_radius + self.wall_thickness
        return self._scaled_radius

    @property
    def tank_radius(self) -> float:
        """Radius entering Laplace's law: the one the storage fraction fixes."""
        return self._scaled_radius

    @property
    def max_pressure(self) -> float:
        return max_tank_pressure(self.wall_thickness, self.wall_strength, self.tank_radius)

    @property
    def fill_pressure(self) -> float:
        return self.fill_pressure_ratio * self.max_pressure

    @property
    def interior_volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.interior_radius**3

    @property
    def other_volume(self) -> float:
        """Robot volume left outside the tank and its wall."""
        return 4.0 / 3.0 * math.pi * (self.robot_radius**3 - self.exterior_radius**3)


def tank_capacity(design: TankDesign, temperature: float = BODY_TEMPERATURE) -> float:
    if design.interior_radius <= 0:
        raise ValueError("tank wall consumes the whole tank")
    return design.interior_volume * vdw_density(design.fill_pressure, temperature)


def fill_time(
    capacity: float, r: float, c_lung: float, phys: PhysiologyParams | None = None, pump_overhead: float = PUMP_OVERHEAD
) -> float:
    """Time to fill a tank in lung plasma, net of the power spent pumping."""
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    D = (phys or PhysiologyParams()).o2_diffusion
    return capacity / ((1.0 - pump_overhead) * robot_absorption_rate(c_lung, r, D))


def molecules_for(power: float, duration: float, spec: RobotSpec, phys: PhysiologyParams) -> float:
    """Oxygen molecules a robot needs to draw ``power`` for ``duration``."""
    return power * duration / (spec.fuel_cell_efficiency * phys.energy_per_o2)


def stored_power(capacity: float, duration: float, spec: RobotSpec, phys: PhysiologyParams | None = None) -> float:
    if not duration > 0:
        raise ValueError("duration must be positive")
    phys = phys or PhysiologyParams()
    return spec.fuel_cell_efficiency * phys.energy_per_o2 * capacity / duration


# --------------------------------------------------------------------------
# transport robots


@dataclass(frozen=True)
class TransportRequirements:
    target_molecules: float = 1.8e10  # per main robot: 100 pW for one 60 s circulation
    supply_duration: float = 60.0
    own_power: float = 0.1e-12  # computation on the transport robot itself
    reserve_power: float = 1e-12  # minimum useful delivery
    fill_window: float = LUNG_TRANSIT
    component_volume: float = 0.1e-18
    pump_depth: float = 10e-9
    pump_max_flux: float = 1e22
    wall_per_radius: float = 20e-9 / 1e-6


def wall_thickness_for(r: float, req: TransportRequirements) -> float:
    return max(req.wall_per_radius * r, MIN_WALL)


@dataclass(frozen=True)
class Feasibility:
    fill_ok: bool
    volume_ok: bool
    energy_ok: bool
    fill_time: float
    capacity: float
    pump_fraction: float
    pump_raw: float

    @property
    def feasible(self) -> bool:
        return self.fill_ok and self.volume_ok and self.energy_ok


def transport_feasibility(
    r: float,
    f: float,
    req: TransportRequirements | None = None,
    spec: RobotSpec | None = None,
    phys: PhysiologyParams | None = None,
) -> Feasibility:
    req = req or TransportRequirements()
    spec = spec or RobotSpec()
    phys = phys or PhysiologyParams()
    c = phys.o2_lung_concentration
    pump = pump_surface_fraction(r, c, phys, req.pump_max_flux)
    design = TankDesign(r, f, wall_thickness_for(r, req))
    if design.interior_radius <= 0:
        return Feasibility(False, False, False, math.inf, 0.0, pump.fraction, pump.raw)
    cap = tank_capacity(design)
    tau = fill_time(cap, r, c, phys)
    components = req.component_volume + 4.0 * math.pi * r * r * pump.fraction * req.pump_depth
    return Feasibility(
        fill_ok=bool(tau <= req.fill_window and not pump.infeasible),
        volume_ok=bool(design.other_volume >= components),
        energy_ok=bool(cap >= molecules_for(req.reserve_power, req.supply_duration, spec, phys)),
        fill_time=float(tau),
        capacity=float(cap),
        pump_fraction=pump.fraction,
        pump_raw=pump.raw,
    )


@dataclass(frozen=True)
class TransportDesign:
    radius: float
    storage_fraction: float
    pump_fraction: float
    tank_capacity: float
    deliverable: float
    fill_time: float
    count_ratio: float
    total_volume_ratio: float
    production_volume_ratio: float
    fill_active: bool
    volume_active: bool
    energy_active: bool

    def to_dict(self) -> dict:
        return asdict(self)


class InfeasibleDesign(ValueError):
    pass


def _evaluate(r, f, req, spec, phys):
    """(objective, feasibility, deliverable); objective is inf when infeasible."""
    feas = transport_feasibility(r, f, req, spec, phys)
    if not feas.feasible:
        return math.inf, feas, 0.0
    own = molecules_for(req.own_power, req.supply_duration, spec, phys)
    deliverable = feas.capacity - own
    if deliverable <= 0:
        return math.inf, feas, deliverable
    count = req.target_molecules / deliverable
    return count * r**3, feas, deliverable


def optimize_transport(
    req: TransportRequirements | None = None,
    spec: RobotSpec | None = None,
    phys: PhysiologyParams | None = None,
    n_r: int = 200,
    n_f: int = 200,
    r_range: tuple[float, float] = (0.05e-6, 1e-6),
    f_max: float = 0.95,
    refinements: int = 4,
) -> TransportDesign:
    """Smallest total transport-robot volume that meets all three constraints.

    Exhaustive grid followed by repeated zoomed grids around the incumbent.
    Ties go to the smallest radius, then the smallest storage fraction.
    """
    req = req or TransportRequirements()
    spec = spec or RobotSpec()
    phys = phys or PhysiologyParams()
    main_volume = MAIN_ROBOT_RADIUS**3

    def search(rs, fs, best):
        for r in rs:
            for f in fs:
                obj, feas, deliv = _evaluate(r, f, req, spec, phys)
                if obj < math.inf and (best is None or (obj, r, f) < best[:3]):
                    best = (obj, r, f, feas, deliv)
        return best

    rs = np.linspace(*r_range, n_r)
    fs = np.linspace(f_max / n_f, f_max, n_f)
    best = search(rs, fs, None)
    if best is None:
        raise InfeasibleDesign("no transport robot design satisfies the fill, volume and energy constraints")
    dr, df = rs[1] - rs[0], fs[1] - fs[0]
    for _ in range(refinements):
        # re-centre at this scale until the incumbent stops moving, then shrink
        for _ in range(50):
            _, r0, f0, _, _ = best
            rs = np.clip(np.linspace(r0 - dr, r0 + dr, 21), *r_range)
            fs = np.clip(np.linspace(f0 - df, f0 + df, 21), 1e-6, f_max)
            best = search(rs, fs, best)
            if best[1:3] == (r0, f0):
                break
        dr, df = dr / 10, df / 10

    obj, r, f, feas, deliv = best
    count = req.target_molecules / deliv if req.target_molecules > 0 else 0.0
    total = count * r**3 / main_volume
    return TransportDesign(
        radius=float(r),
        storage_fraction=float(f),
        pump_fraction=float(feas.pump_fraction),
        tank_capacity=float(feas.capacity),
        deliverable=float(deliv),
        fill_time=float(feas.fill_time),
        count_ratio=float(count),
        total_volume_ratio=float(total),
        production_volume_ratio=float((1.0 - f) * total),
        fill_active=bool(abs(feas.fill_time - req.fill_window) <= 0.1 * req.fill_window),
        volume_active=bool(_volume_slack(r, f, req, phys) <= 0.1),
        energy_active=bool(feas.capacity <= 1.1 * molecules_for(req.reserve_power, req.supply_duration, spec, phys)),
    )


def _volume_slack(r, f, req, phys) -> float:
    design = TankDesign(r, f, wall_thickness_for(r, req))
    pump = pump_surface_fraction(r, phys.o2_lung_concentration, phys, req.pump_max_flux)
    need = req.component_volume + 4.0 * math.pi * r * r * pump.fraction * req.pump_depth
    return design.other_volume / need - 1.0


# --------------------------------------------------------------------------
# reservoir robots


@dataclass(frozen=True)
class ReservoirDemand:
    robots: float = 1e12
    power: float = 100e-12
    window: float = 20.0  # s of each circulation during which the robots draw power


def default_reservoir_tank() -> TankDesign:
    return TankDesign(1e-6, 0.8, 20e-9, basis="interior")


def reservoir_design(
    demand: ReservoirDemand,
    tank: TankDesign | None = None,
    phys: PhysiologyParams | None = None,
    spec: RobotSpec | None = None,
    own_power: float = 10e-12,
    lung_transit: float = LUNG_TRANSIT,
) -> dict:
    """Size a population of reservoir robots that supply a peak demand."""
    phys = phys or PhysiologyParams()
    spec = spec or RobotSpec()
    tank = tank or default_reservoir_tank()
    T = phys.circulation_time
    if not 0 <= demand.window <= T:
        raise ValueError("demand window must lie within one circulation")
    active = demand.robots * demand.window / T
    rate = molecules_for(active * demand.power, 1.0, spec, phys)
    stock = rate * T
    capacity = tank_capacity(tank)
    own = molecules_for(own_power, T, spec, phys)
    net = capacity - own
    count = stock / net if stock > 0 else 0.0
    tau = fill_time(capacity, tank.robot_radius, phys.o2_lung_concentration, phys)
    return {
        "supply_rate": rate,
        "stock": stock,
        "capacity_per_robot": float(capacity),
        "own_use_fraction": own / capacity,
        "robot_count": count,
        "fill_time_s": float(tau),
        "circulations_to_fill": math.ceil(tau / lung_transit),
        "max_pressure_Pa": tank.max_pressure,
        "exterior_volume_fraction": (tank.exterior_radius / tank.robot_radius) ** 3,
    }
