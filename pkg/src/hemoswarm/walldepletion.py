"""Steady oxygen field in a straight vessel with radially varying robot uptake.

Poiseuille flow at high Peclet number: axial diffusion is dropped and the
steady equation

    v(r) d/dx [c + h/(1-h) C_max S(c)] = D (1/r) d/dr (r dc/dr) - k(r) c

is marched downstream from a uniform inlet. Each x-step is backward Euler with
a finite-volume radial operator; the Hill nonlinearity is resolved by Newton
iteration on a tridiagonal system.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .bloodgas import HillCurve, saturation, saturation_slope
from .params import PhysiologyParams, RobotSpec
from .policies import DutyCycle, Fraction, HistoryEffective, NearWallOff, PowerPolicy, Unlimited, policy_to_dict
from .transport import peclet_number, robot_rate_constant

NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 50


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class VesselCase:
    radius: float = 1e-3
    length: float = 4e-2
    mean_speed: float = 2.5e-3
    inlet_concentration: float = 0.5e22
    robot_count: float = 1e12
    policy: PowerPolicy = field(default_factory=Unlimited)
    hematocrit: float | None = None  # defaults to the overall value
    n_r: int = 256
    n_x: int = 512
    # axial stations x_j = L (j/n_x)^p cluster near the inlet boundary layer
    x_stretch: float = 2.0

    def __post_init__(self):
        if not (self.radius > 0 and self.length > 0 and self.mean_speed > 0):
            raise ValueError("radius, length and mean_speed must be positive")
        if self.inlet_concentration < 0:
            raise ValueError("inlet concentration must be >= 0")
        if isinstance(self.policy, NearWallOff) and not self.policy.band < self.radius:
            raise ValueError("near-wall band must be narrower than the vessel radius")
        if self.n_r < 4 or self.n_x < 1:
            raise ValueError("need at least 4 radial cells and 1 axial step")
        if not self.x_stretch >= 1:
            raise ValueError("x_stretch must be >= 1")

    def label(self) -> str:
        return policy_to_dict(self.policy)["type"]


@dataclass
class FieldSolution:
    r: np.ndarray  # radial cell centres
    x: np.ndarray  # axial stations including the inlet
    c: np.ndarray  # shape (n_r, len(x))
    wall: np.ndarray
    case: VesselCase
    newton_iterations: int

    def flux(self, phys: PhysiologyParams | None = None) -> np.ndarray:
        """Oxygen carried past each station (plasma plus cells), molecule/s."""
        phys = phys or PhysiologyParams()
        h = _hematocrit(self.case, phys)
        curve = HillCurve.from_params(phys)
        dr = self.r[1] - self.r[0]
        v = _velocity(self.r, self.case)
        u = self.c + h / (1 - h) * phys.cell_o2_max * saturation(curve, self.c)
        return (2 * math.pi * self.r * dr * v) @ u

    def uptake(self, phys: PhysiologyParams | None = None) -> np.ndarray:
        """Robot uptake per unit length at each station, molecule/(m s)."""
        phys = phys or PhysiologyParams()
        dr = self.r[1] - self.r[0]
        k = _rate_profile(self.r, self.case, phys)
        return (2 * math.pi * self.r * dr * k) @ self.c

    def dump(self, path) -> None:
        """Little-endian binary: int64 n_r, int64 n_x, then n_r*n_x float64 row-major."""
        n_r, n_x = self.c.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", n_r, n_x))
            fh.write(np.ascontiguousarray(self.c, dtype="<f8").tobytes())


def read_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        n_r, n_x = struct.unpack("<qq", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(n_r, n_x)


def axial_stations(case: VesselCase) -> np.ndarray:
    return case.length * np.linspace(0.0, 1.0, case.n_x + 1) ** case.x_stretch


def _hematocrit(case: VesselCase, phys: PhysiologyParams) -> float:
    return phys.overall_hematocrit if case.hematocrit is None else case.hematocrit


def _velocity(r: np.ndarray, case: VesselCase) -> np.ndarray:
    return 2.0 * case.mean_speed * (1.0 - (r / case.radius) ** 2)


def _rate_profile(r: np.ndarray, case: VesselCase, phys: PhysiologyParams) -> np.ndarray:
    h = _hematocrit(case, phys)
    k = robot_rate_constant(RobotSpec(count=case.robot_count), h, phys)
    p = case.policy
    if isinstance(p, Unlimited):
        mult = np.ones_like(r)
    elif isinstance(p, Fraction):
        mult = np.full_like(r, p.fraction)
    elif isinstance(p, (DutyCycle, HistoryEffective)):
        mult = np.full_like(r, p.active_fraction if isinstance(p, DutyCycle) else p.effective_fraction)
    elif isinstance(p, NearWallOff):
        mult = (r < case.radius - p.band).astype(float)
    else:
        raise ValueError(f"policy {type(p).__name__} is not supported in the vessel solver")
    return k * mult


def _radial_operator(n_r: int, dr: float, r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower, main and upper diagonals of (1/r) d/dr(r d/dr) with no-flux ends."""
    faces = np.arange(n_r + 1) * dr  # face radii; r=0 and r=R carry no flux
    w_lo = faces[:-1] / (r * dr * dr)
    w_hi = faces[1:] / (r * dr * dr)
    w_hi[-1] = 0.0
    lower = w_lo[1:].copy()
    upper = w_hi[:-1].copy()
    main = -(w_lo + w_hi)
    return lower, main, upper


def wall_value(c_col: np.ndarray):
    """Quadratic extrapolation to the wall with zero normal gradient.

    Works on a single radial column or on a (n_r, n_x) field at once.
    """
    return (9.0 * c_col[-1] - c_col[-2]) / 8.0


def solve_vessel(case: VesselCase, phys: PhysiologyParams | None = None) -> FieldSolution:
    phys = phys or PhysiologyParams()
    curve = HillCurve.from_params(phys)
    h = _hematocrit(case, phys)
    beta = h / (1 - h) * phys.cell_o2_max

    n_r, n_x = case.n_r, case.n_x
    dr = case.radius / n_r
    x = axial_stations(case)
    r = (np.arange(n_r) + 0.5) * dr
    v = _velocity(r, case)
    k = _rate_profile(r, case, phys)
    lo, mid, up = _radial_operator(n_r, dr, r)
    D = phys.o2_diffusion

    def u_of(c):
        return c + beta * saturation(curve, c)

    def du_dc(c):
        return 1.0 + beta * saturation_slope(curve, c)

    c_field = np.empty((n_r, n_x + 1))
    c_field[:, 0] = case.inlet_concentration
    c = c_field[:, 0].copy()
    scale = max(case.inlet_concentration, 1.0)
    total_iter = 0
    ab = np.zeros((3, n_r))
    for j in range(1, n_x + 1):
        dx = x[j] - x[j - 1]
        u_old = u_of(c)
        c_new = c.copy()
        for it in range(NEWTON_MAX_ITER):
            lap = mid * c_new
            lap[1:] += lo * c_new[:-1]
            lap[:-1] += up * c_new[1:]
            resid = v * (u_of(c_new) - u_old) / dx - D * lap + k * c_new
            ab[0, 1:] = -D * up
            ab[1, :] = v * du_dc(c_new) / dx - D * mid + k
            ab[2, :-1] = -D * lo
            delta = solve_banded((1, 1), ab, -resid)
            c_new = np.maximum(c_new + delta, 0.0)
            total_iter += 1
            if np.max(np.abs(delta)) <= NEWTON_TOL * scale:
                break
        else:
            raise ConvergenceError(f"Newton iteration stalled at x = {x[j]:.4g} m")
        c = c_new
        c_field[:, j] = c

    wall = np.maximum(wall_value(c_field), 0.0)
    return FieldSolution(r, x, c_field, wall, case, total_iter)


def vessel_peclet(case: VesselCase, phys: PhysiologyParams | None = None) -> float:
    phys = phys or PhysiologyParams()
    return peclet_number(case.mean_speed, 2 * case.radius, phys.o2_diffusion)


def default_cases(**overrides) -> list[VesselCase]:
    """Full uptake, no uptake within 0.3 mm of the wall, and uniform half uptake."""
    return [
        VesselCase(policy=Unlimited(), **overrides),
        VesselCase(policy=NearWallOff(0.3e-3), **overrides),
        VesselCase(policy=Fraction(0.5), **overrides),
    ]


@dataclass
class WallComparison:
    x: np.ndarray
    curves: dict[str, np.ndarray]
    solutions: dict[str, FieldSolution]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x_m", "policy", "c_wall"))
        for name, curve in self.curves.items():
            for xi, ci in zip(self.x, curve):
                w.writerow((repr(float(xi)), name, repr(float(ci))))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def wall_trace_compare(cases: list[VesselCase] | None = None, phys: PhysiologyParams | None = None) -> WallComparison:
    cases = cases if cases is not None else default_cases()
    ref = cases[0]
    for cs in cases[1:]:
        same = (cs.radius, cs.length, cs.n_r, cs.n_x, cs.x_stretch, cs.inlet_concentration, cs.mean_speed) == (
            ref.radius, ref.length, ref.n_r, ref.n_x, ref.x_stretch, ref.inlet_concentration, ref.mean_speed)
        if not same:
            raise ValueError("all cases must share geometry, inlet and grid")
    sols = {cs.label(): solve_vessel(cs, phys) for cs in cases}
    x = next(iter(sols.values())).x
    return WallComparison(x, {name: s.wall for name, s in sols.items()}, sols)
