"""Oxygen chemistry: hemoglobin saturation and the stored-gas equation of state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .params import AVOGADRO, BODY_TEMPERATURE, GAS_CONSTANT, PhysiologyParams

# Handbook van der Waals constants for O2
VDW_A_O2 = 0.1382  # Pa m^6 / mol^2
VDW_B_O2 = 3.186e-5  # m^3 / mol


@dataclass(frozen=True)
class HillCurve:
    """Equilibrium hemoglobin saturation as a function of plasma O2 concentration."""

    c_half: float
    exponent: float

    def __post_init__(self):
        if not self.c_half > 0:
            raise ValueError("c_half must be positive")
        if not self.exponent > 1:
            raise ValueError("Hill exponent must exceed 1")

    @classmethod
    def from_params(cls, phys: PhysiologyParams) -> "HillCurve":
        return cls(c_half=phys.c_half, exponent=phys.hill_exponent)


def saturation(curve: HillCurve, c):
    a = np.maximum(np.asarray(c, dtype=float), 0.0) / curve.c_half
    an = a**curve.exponent
    out = an / (1.0 + an)
    return float(out) if out.ndim == 0 else out


def saturation_slope(curve: HillCurve, c):
    """dS/dc of the Hill curve; zero at c = 0 since the exponent exceeds one."""
    n = curve.exponent
    a = np.maximum(np.asarray(c, dtype=float), 0.0) / curve.c_half
    out = (n / curve.c_half) * a ** (n - 1.0) / (1.0 + a**n) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GasState:
    pressure: float
    temperature: float
    number_density: float


def _vdw_residual(n_m: float, pressure: float, temperature: float) -> float:
    return (pressure + VDW_A_O2 * n_m * n_m) * (1.0 / n_m - VDW_B_O2) - GAS_CONSTANT * temperature


def vdw_density(pressure: float, temperature: float = BODY_TEMPERATURE) -> float:
    """Number density (molecule/m^3) of O2 at the given pressure and temperature.

    Solves the van der Waals equation for molar density on the gas branch,
    bracketed between zero and the co-volume limit 1/b.
    """
    if not pressure > 0:
        raise ValueError("pressure must be positive")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    lo = 1e-12
    hi = (1.0 / VDW_B_O2) * (1.0 - 1e-12)
    f_lo = _vdw_residual(lo, pressure, temperature)
    f_hi = _vdw_residual(hi, pressure, temperature)
    if f_lo * f_hi > 0:
        raise ValueError(f"no van der Waals root for P={pressure} Pa, T={temperature} K")
    ideal = pressure / (GAS_CONSTANT * temperature)
    # above the critical temperature (O2: 155 K) the root in (0, 1/b) is unique
    n_m = brentq(_vdw_residual, lo, hi, args=(pressure, temperature), xtol=ideal * 1e-14, rtol=1e-14, maxiter=500)
    return n_m * AVOGADRO


def gas_state(pressure: float, temperature: float = BODY_TEMPERATURE) -> GasState:
    return GasState(pressure, temperature, vdw_density(pressure, temperature))
