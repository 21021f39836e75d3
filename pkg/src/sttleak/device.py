"""Closed-form MTJ device physics.

Thermal stability, retention, write latency, resistance and per-cell current
levels for a single STTRAM bit.  Everything here is a pure function of a
frozen :class:`DeviceParams` value, so the module is safe to call from any
thread.

Calibration anchors used for the defaults:

* a 40 nm x 40 nm x 4 nm free layer has a thermal stability of 40 at 300 K
  (``k_u`` is solved from this, see :data:`DEFAULT_K_U`);
* a thermal stability of 40 gives ~10 years of retention
  (``RetentionFit.c = 1.34 ns`` with ``k = 1``);
* the slow (P->AP) write at thermal stability 40 and 1 V takes 0.59 ns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

K_B = 1.380649e-23
"""Boltzmann constant, J/K."""

REFERENCE_TEMPERATURE = 300.0
SECONDS_PER_YEAR = 365.25 * 86400.0

RETENTION_CAP_S = 1e18
"""Retention times saturate here instead of overflowing to inf."""

DEFAULT_AREA = 40e-9 * 40e-9
DEFAULT_THICKNESS = 4e-9
DEFAULT_K_U = 40.0 * K_B * REFERENCE_TEMPERATURE / (DEFAULT_AREA * DEFAULT_THICKNESS)
"""Anisotropy energy density (J/m^3) giving thermal stability 40 at 300 K.

Evaluates to ~2.5887e4.  The rounded 2.59e4 would put the anchor at 40.02.
"""


class ParameterError(ValueError):
    """A physical parameter or operation argument is out of its domain."""


class BitState(Enum):
    """Magnetic state of a cell.  '0' is parallel, '1' is anti-parallel."""

    P = 0
    AP = 1

    @classmethod
    def from_bit(cls, bit: int) -> "BitState":
        if bit not in (0, 1):
            raise ParameterError(f"bit must be 0 or 1, got {bit!r}")
        return cls.AP if bit else cls.P

    @property
    def bit(self) -> int:
        return self.value


class Direction(Enum):
    P_TO_AP = "P->AP"  # writing '1' over '0', the slow direction
    AP_TO_P = "AP->P"

    @classmethod
    def of(cls, old_bit: int, new_bit: int) -> "Direction":
        if old_bit == new_bit:
            raise ParameterError("no switching direction for old_bit == new_bit")
        return cls.P_TO_AP if new_bit else cls.AP_TO_P


class CellMode(Enum):
    WRITE = "write-const-voltage"
    READ = "read"


@dataclass(frozen=True)
class DeviceParams:
    """Nominal parameters of one MTJ cell and its driver voltages.

    ``k_u`` lumps the anisotropy field and saturation magnetization into a
    single energy density, so thermal stability is ``k_u * volume / (k_B T)``.
    ``tau0`` is the slow-direction write latency at ``delta0`` and 1 V.
    """

    k_u: float = DEFAULT_K_U
    area: float = DEFAULT_AREA
    thickness: float = DEFAULT_THICKNESS
    tmr: float = 1.0
    r_low: float = 5e3
    v_write_eff: float = 0.75
    v_supply: float = 1.0
    read_current_fraction: float = 0.2
    tau0: float = 0.59e-9
    delta0: float = 40.0
    dir_asymmetry: float = 0.6

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{f.name} must be a finite positive number, got {value!r}")
        if self.dir_asymmetry > 1:
            raise ParameterError("dir_asymmetry must lie in (0, 1]")
        # read current must stay below the AP write current, not just below 1x
        if self.read_current_fraction * (1.0 + self.tmr) >= 1.0:
            raise ParameterError(
                "read_current_fraction * (1 + tmr) must be < 1 so reads cannot disturb"
            )

    @property
    def r_high(self) -> float:
        return self.r_low * (1.0 + self.tmr)

    @property
    def volume(self) -> float:
        return self.area * self.thickness

    def to_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class RetentionFit:
    """Fitting constants of ``t = c * exp(k * delta)``."""

    c: float = 1.34e-9
    k: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.k > 0):
            raise ParameterError("retention fit constants c and k must be positive")


def _check_temperature(temperature):
    if np.any(np.asarray(temperature) <= 0):
        raise ParameterError(f"temperature must be positive, got {temperature!r}")


def thermal_stability(params: DeviceParams, temperature: float = REFERENCE_TEMPERATURE) -> float:
    """Thermal stability factor at ``temperature`` kelvin."""
    _check_temperature(temperature)
    return params.k_u * params.area * params.thickness / (K_B * temperature)


def retention_time(delta: float, fit: RetentionFit = RetentionFit()) -> float:
    """Retention time in seconds, saturating at :data:`RETENTION_CAP_S`."""
    if delta < 0:
        raise ParameterError(f"delta must be >= 0, got {delta!r}")
    if retention_saturated(delta, fit):
        return RETENTION_CAP_S
    return fit.c * math.exp(fit.k * delta)


def retention_saturated(delta: float, fit: RetentionFit = RetentionFit()) -> bool:
    """True when :func:`retention_time` returns the cap rather than the formula."""
    return fit.k * delta >= math.log(RETENTION_CAP_S / fit.c)


def _direction_factor(direction: Direction, params: DeviceParams) -> float:
    return 1.0 if direction is Direction.P_TO_AP else params.dir_asymmetry


def write_latency(
    delta,
    supply_voltage: float,
    direction: Direction,
    params: DeviceParams,
):
    """Constant-voltage switching time in seconds.

    Linear in ``delta`` through the ``(delta0, tau0)`` anchor and inversely
    proportional to the supply voltage.  ``delta`` may be an array.
    """
    if np.any(np.asarray(delta) <= 0):
        raise ParameterError("delta must be positive")
    if supply_voltage <= 0:
        raise ParameterError("supply_voltage must be positive")
    d = _direction_factor(direction, params)
    return params.tau0 * (delta / params.delta0) * (1.0 / supply_voltage) * d


def resistance(state: BitState, params: DeviceParams) -> float:
    return params.r_high if state is BitState.AP else params.r_low


def cell_current(state: BitState, mode: CellMode, params: DeviceParams) -> float:
    """Current through one cell in amperes.

    Writes are constant-voltage (Ohm's law at ``v_write_eff``).  Reads draw a
    fixed fraction of the parallel-state write current, scaled by the
    resistance ratio of the stored state.
    """
    r = resistance(state, params)
    if mode is CellMode.WRITE:
        return params.v_write_eff / r
    return params.read_current_fraction * params.v_write_eff / params.r_low * (params.r_low / r)


def scale_volume(params: DeviceParams, factor: float) -> DeviceParams:
    """Scale free-layer thickness (area fixed), hence thermal stability, by ``factor``."""
    if not factor > 0:
        raise ParameterError(f"volume factor must be positive, got {factor!r}")
    if factor == 1:
        return params
    return replace(params, thickness=params.thickness * factor)
