"""Plasma oxygen and robot power along the circulation loop.

The state follows a parcel of blood moving with the red cells (and robots).
Cells hold oxygen in Hill equilibrium with the plasma, so eliminating the
cell-to-plasma transfer leaves one ODE for the plasma concentration:

    dc/dt = rho * R1 / (1 + B),   B = h/(1-h) * C_max * S'(c) * rho

with rho = v_cell/v_plasma and R1 the (negative) net source per plasma
volume from robots and, in the body capillary, tissue.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .bloodgas import HillCurve, saturation, saturation_slope
from .circuit import VesselCircuit, VesselSegment, hematocrit_in_vessel, split_speeds
from .params import PhysiologyParams, RobotSpec
from .policies import PowerPolicy, Unlimited, apply_policy

RTOL = 1e-6
ATOL = 1e14  # molecule/m^3
CAPILLARY_MAX_STEP = 0.01
SAMPLE_STEP = 0.05
# concentration treated as exhausted once it falls this far below the lung value
DEPLETION_FRACTION = 1e-6
CAPILLARY_VOLUME_FRACTION = 0.05
CAPILLARY_COUNT = 2e10
TRACE_COLUMNS = ("t_s", "x_m", "kind", "diameter_m", "hematocrit", "c_plasma", "sat", "power_W", "power_unlimited_W")


class SolverError(RuntimeError):
    pass


def robot_absorption_rate(c: float, r: float, D: float) -> float:
    """Diffusion-limited uptake of a perfectly absorbing sphere (molecule/s)."""
    return 4.0 * math.pi * D * r * c


def robot_power(rate: float, spec: RobotSpec, phys: PhysiologyParams) -> float:
    return spec.fuel_cell_efficiency * phys.energy_per_o2 * rate


def robot_rate_constant(spec: RobotSpec, h: float, phys: PhysiologyParams, density_factor: float = 1.0) -> float:
    """k such that robots remove k*c molecules per second per m^3 of plasma."""
    density = density_factor * spec.count / phys.blood_volume
    return 4.0 * math.pi * phys.o2_diffusion * spec.radius * density / (1.0 - h)


def robot_sink_rate(c: float, spec: RobotSpec, h: float, phys: PhysiologyParams) -> float:
    if not 0 < h < 1:
        raise ValueError("hematocrit must lie in (0, 1)")
    return robot_rate_constant(spec, h, phys) * max(c, 0.0)


def tissue_power_density(c: float, phys: PhysiologyParams) -> float:
    c = max(c, 0.0)
    return phys.tissue_power_max * c / (phys.tissue_half_concentration + c)


def tissue_sink_rate(c: float, phys: PhysiologyParams, h: float | None = None) -> float:
    """Oxygen removed from capillary plasma by the surrounding tissue cylinder."""
    if h is None:
        h = hematocrit_in_vessel(2e6 * phys.capillary_radius, phys.overall_hematocrit)
    per_tissue_volume = tissue_power_density(c, phys) / phys.energy_per_o2
    return per_tissue_volume * phys.tissue_volume_ratio / (1.0 - h)


def buffer_factor(c: float, h: float, speed_ratio: float, curve: HillCurve, phys: PhysiologyParams) -> float:
    return h / (1.0 - h) * phys.cell_o2_max * saturation_slope(curve, c) * speed_ratio


def oxygen_flux(c, seg: VesselSegment, phys: PhysiologyParams, curve: HillCurve | None = None):
    """Oxygen carried through a segment's cross-section per second, plasma plus cells."""
    curve = curve or HillCurve.from_params(phys)
    h = seg.hematocrit
    return seg.area * ((1 - h) * seg.v_plasma * np.asarray(c) + h * seg.v_cell * phys.cell_o2_max * saturation(curve, c))


def peclet_number(v: float, d: float, D: float) -> float:
    return v * d / D


def capillary_visit_rate(count: float, phys: PhysiologyParams | None = None,
                         n_capillaries: float = CAPILLARY_COUNT) -> float:
    """How often some robot passes through a given capillary (1/s)."""
    t = phys.circulation_time if phys else 60.0
    return 1.25 * count / (t * n_capillaries)


# --------------------------------------------------------------------------
# loop integration


@dataclass
class LoopTrace:
    t: np.ndarray
    x: np.ndarray
    kind: list[str]
    diameter: np.ndarray
    hematocrit: np.ndarray
    c: np.ndarray
    sat: np.ndarray
    power: np.ndarray
    power_unlimited: np.ndarray
    avg_power: float
    avg_power_unlimited: float
    min_power: float
    final_c: float
    loop_duration: float
    depletion_time: float | None
    count: float
    fuel_cell_efficiency: float
    meta: dict = field(default_factory=dict)

    @property
    def depleted(self) -> bool:
        return self.depletion_time is not None

    @property
    def final_saturation(self) -> float:
        return float(self.sat[-1])

    def summary(self) -> dict:
        return {
            "avg_power_W": self.avg_power,
            "min_power_W": None if self.depleted else self.min_power,
            "total_dissipation_W": total_dissipation(self),
            "final_c_plasma": self.final_c,
            "final_saturation": self.final_saturation,
            "depletion_time_s": self.depletion_time,
            "loop_duration_s": self.loop_duration,
        }

    def rows(self):
        for i in range(len(self.t)):
            yield (self.t[i], self.x[i], self.kind[i], self.diameter[i], self.hematocrit[i],
                   self.c[i], self.sat[i], self.power[i], self.power_unlimited[i])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.rows():
            w.writerow([row[0], row[1], row[2]] + [repr(float(v)) for v in row[3:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def total_dissipation(trace: LoopTrace, spec: RobotSpec | None = None) -> float:
    """Heat from all robots: delivered power plus fuel-cell losses (W)."""
    f = spec.fuel_cell_efficiency if spec else trace.fuel_cell_efficiency
    count = spec.count if spec else trace.count
    return trace.avg_power * count / f


def _segment_rhs(seg, k, policy, spec, phys, curve, tissue_on):
    h = seg.hematocrit
    rho = seg.speed_ratio
    radius = seg.diameter / 2
    p_per_c = robot_power(robot_absorption_rate(1.0, spec.radius, phys.o2_diffusion), spec, phys)

    def rhs(t, y):
        c = max(y[0], 0.0)
        p_unl = p_per_c * c
        m = apply_policy(policy, seg.kind, p_unl, seg.region, radius) if k > 0 else 0.0
        r1 = -m * k * c
        if tissue_on:
            r1 -= tissue_sink_rate(c, phys, h)
        dc = rho * r1 / (1.0 + buffer_factor(c, h, rho, curve, phys))
        return [dc, m * p_unl, p_unl]

    return rhs


def _depletion_event(threshold):
    def event(t, y):
        return y[0] - threshold

    event.terminal = True
    event.direction = -1
    return event


def integrate_loop(
    circuit: VesselCircuit,
    spec: RobotSpec,
    policy: PowerPolicy | None = None,
    phys: PhysiologyParams | None = None,
    sample_step: float = SAMPLE_STEP,
    c0: float | None = None,
    tissue: bool = True,
) -> LoopTrace:
    """Follow a robot once around the loop, starting saturated at the lung."""
    phys = phys or PhysiologyParams()
    policy = policy or Unlimited()
    curve = HillCurve.from_params(phys)
    c = phys.o2_lung_concentration if c0 is None else float(c0)
    threshold = DEPLETION_FRACTION * phys.o2_lung_concentration
    p_per_c = robot_power(robot_absorption_rate(1.0, spec.radius, phys.o2_diffusion), spec, phys)

    ts, xs, kinds, ds, hs, cs, pl, pu = [], [], [], [], [], [], [], []
    t0 = x0 = 0.0
    e_lim = e_unl = 0.0
    depleted_at = None

    for seg in circuit.segments:
        dur = seg.residence_time
        n = max(1, math.ceil(dur / sample_step - 1e-9))
        t_samp = np.linspace(0.0, dur, n + 1)
        tissue_on = tissue and seg.tissue

        if depleted_at is not None:
            c_samp = np.zeros_like(t_samp)
            lim_samp = np.zeros_like(t_samp)
        else:
            k = robot_rate_constant(spec, seg.hematocrit, phys)
            rhs = _segment_rhs(seg, k, policy, spec, phys, curve, tissue_on)
            sol = solve_ivp(
                rhs, (0.0, dur), [c, 0.0, 0.0], method="RK45", rtol=RTOL, atol=[ATOL, 1e-30, 1e-30],
                max_step=CAPILLARY_MAX_STEP if seg.tissue else np.inf,
                dense_output=True, events=_depletion_event(threshold),
            )
            if sol.status < 0:
                raise SolverError(f"integration failed in {seg.kind} segment: {sol.message}")
            t_end = sol.t[-1]
            inside = t_samp <= t_end
            c_samp = np.zeros_like(t_samp)
            c_samp[inside] = np.maximum(sol.sol(t_samp[inside])[0], 0.0)
            e_lim += sol.y[1, -1]
            e_unl += sol.y[2, -1]
            lim_samp = np.array([
                apply_policy(policy, seg.kind, p_per_c * ci, seg.region, seg.diameter / 2)
                if ci > 0 and spec.count > 0 else 0.0
                for ci in c_samp
            ])
            if sol.status == 1:
                depleted_at = t0 + t_end
                c = 0.0
            else:
                c = max(sol.y[0, -1], 0.0)

        p_unl = p_per_c * c_samp
        ts.append(t0 + t_samp)
        xs.append(x0 + np.minimum(t_samp * seg.v_cell, seg.length))
        kinds.extend([seg.kind] * len(t_samp))
        ds.append(np.full(len(t_samp), seg.diameter))
        hs.append(np.full(len(t_samp), seg.hematocrit))
        cs.append(c_samp)
        pl.append(lim_samp * p_unl)
        pu.append(p_unl)
        t0 += dur
        x0 += seg.length

    c_all = np.concatenate(cs)
    power = np.concatenate(pl)
    duration = t0
    return LoopTrace(
        t=np.concatenate(ts),
        x=np.concatenate(xs),
        kind=kinds,
        diameter=np.concatenate(ds),
        hematocrit=np.concatenate(hs),
        c=c_all,
        sat=np.asarray(saturation(curve, c_all)),
        power=power,
        power_unlimited=np.concatenate(pu),
        avg_power=e_lim / duration,
        avg_power_unlimited=e_unl / duration,
        min_power=float(power.min()),
        final_c=float(c_all[-1]),
        loop_duration=duration,
        depletion_time=depleted_at,
        count=spec.count,
        fuel_cell_efficiency=spec.fuel_cell_efficiency,
        meta={"dataset_version": circuit.dataset_version},
    )


# --------------------------------------------------------------------------
# robots anchored in body capillaries


@dataclass
class CapillaryTrace:
    x: np.ndarray
    c: np.ndarray
    sat: np.ndarray
    power: np.ndarray
    power_unlimited: np.ndarray
    entry_c: float
    avg_power: float
    heating_density: float  # W per m^3 of capillary blood

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x_m", "c_plasma", "sat", "power_W", "power_unlimited_W"))
        for row in zip(self.x, self.c, self.sat, self.power, self.power_unlimited):
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def integrate_capillary_resident(
    spec: RobotSpec,
    policy: PowerPolicy | None = None,
    phys: PhysiologyParams | None = None,
    capillary_speed: float = 1e-3,
    length: float = 1e-3,
    diameter: float = 8e-6,
    n_samples: int = 201,
) -> CapillaryTrace:
    """Steady profile along a capillary whose wall carries the whole robot population.

    Only capillaries hold robots, so their local density is 1/0.05 = 20 times
    the blood-wide value. Nothing upstream consumes oxygen, so blood enters at
    the lung concentration regardless of the robot count.
    """
    phys = phys or PhysiologyParams()
    policy = policy or Unlimited()
    curve = HillCurve.from_params(phys)
    h_full = phys.overall_hematocrit
    h = hematocrit_in_vessel(diameter * 1e6, h_full)
    v_plasma, v_cell = split_speeds(capillary_speed, h, h_full)
    rho = v_cell / v_plasma
    density_factor = 1.0 / CAPILLARY_VOLUME_FRACTION
    k = robot_rate_constant(spec, h, phys, density_factor)
    p_per_c = robot_power(robot_absorption_rate(1.0, spec.radius, phys.o2_diffusion), spec, phys)
    entry = phys.o2_lung_concentration

    def mult(c):
        return apply_policy(policy, "capillary", p_per_c * c, "capillary", diameter / 2)

    def rhs(x, y):
        c = max(y[0], 0.0)
        r1 = -mult(c) * k * c - tissue_sink_rate(c, phys, h)
        return [r1 / (v_plasma * (1.0 + buffer_factor(c, h, rho, curve, phys)))]

    xs = np.linspace(0.0, length, n_samples)
    sol = solve_ivp(rhs, (0.0, length), [entry], rtol=RTOL, atol=ATOL, t_eval=xs,
                    max_step=CAPILLARY_MAX_STEP * v_cell)
    if not sol.success:
        raise SolverError(f"capillary integration failed: {sol.message}")
    c = np.maximum(sol.y[0], 0.0)
    p_unl = p_per_c * c
    power = np.array([mult(ci) for ci in c]) * p_unl
    avg = float(np.trapezoid(power, xs) / length)
    robots_per_volume = density_factor * spec.count / phys.blood_volume
    heating = avg / spec.fuel_cell_efficiency * robots_per_volume
    return CapillaryTrace(xs, c, np.asarray(saturation(curve, c)), power, p_unl, entry, avg, heating)
