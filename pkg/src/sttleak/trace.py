"""Supply-current traces for word-parallel STTRAM writes and reads.

All bits of a word are driven at once, so the supply sees the sum of the
per-cell currents.  Under a constant-voltage driver each cell carries
``v_write_eff / R(old state)`` from wordline assertion until it switches and
``v_write_eff / R(new state)`` afterwards; switching is an instantaneous
resistance step unless ``smoothing_tau`` is given.  A constant-current
driver forces ``i_write`` through every cell regardless of data.

Per-sample sums are taken over sorted contributions so that permuting the
bit positions of a word (together with its cells) reproduces the noiseless
trace bit for bit.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .device import (
    REFERENCE_TEMPERATURE,
    DeviceParams,
    Direction,
    ParameterError,
    thermal_stability,
)
from .variation import PvSample

DEFAULT_SAMPLE_RATE = 10e9
MAX_WIDTH = 512
PULSE_MARGIN = 2.0
"""Default wordline pulse as a multiple of the slowest nominal switch time."""


class WriteFailure(RuntimeError):
    """A cell did not finish switching within the wordline pulse."""

    def __init__(self, bit: int, switch_time: float, pulse: float):
        self.bit = bit
        self.switch_time = switch_time
        self.pulse = pulse
        super().__init__(
            f"write failure at bit {bit}: switch time {switch_time:.4g} s "
            f"exceeds wordline pulse {pulse:.4g} s"
        )


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class Word:
    """An ordered word of logical bits, most significant first."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not 1 <= len(bits) <= MAX_WIDTH:
            raise ParameterError(f"word width must lie in [1, {MAX_WIDTH}], got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ParameterError("word bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_int(cls, value: int, width: int) -> "Word":
        if value < 0 or value >= 1 << width:
            raise ParameterError(f"value {value} does not fit in {width} bits")
        return cls(tuple((value >> (width - 1 - i)) & 1 for i in range(width)))

    @classmethod
    def parse(cls, text: str, width: int | None = None) -> "Word":
        """Parse a binary string (``0111``) or hex (``0x7``, requires ``width``)."""
        text = text.strip().replace("_", "")
        if text.lower().startswith("0x"):
            if width is None:
                raise ParameterError("hex words need an explicit width")
            try:
                return cls.from_int(int(text, 16), width)
            except ValueError as exc:
                raise ParameterError(f"bad hex word {text!r}") from exc
        if text.lower().startswith("0b"):
            text = text[2:]
        if not re.fullmatch(r"[01]+", text):
            raise ParameterError(f"bad binary word {text!r}")
        if width is not None and len(text) != width:
            if len(text) > width:
                raise ParameterError(f"word {text!r} is wider than {width} bits")
            text = text.zfill(width)
        return cls(tuple(int(c) for c in text))

    @property
    def width(self) -> int:
        return len(self.bits)

    @property
    def hamming_weight(self) -> int:
        return sum(self.bits)

    def to_int(self) -> int:
        v = 0
        for b in self.bits:
            v = (v << 1) | b
        return v

    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int8)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class Environment:
    temperature: float = REFERENCE_TEMPERATURE
    magnetic_tamper_factor: float = 1.0
    wordline_pulse: float | None = None  # None: PULSE_MARGIN x slowest nominal switch

    def __post_init__(self):
        if not self.temperature > 0:
            raise ParameterError("temperature must be positive")
        if not self.magnetic_tamper_factor >= 1:
            raise ParameterError("magnetic_tamper_factor must be >= 1")
        if self.wordline_pulse is not None and not self.wordline_pulse > 0:
            raise ParameterError("wordline_pulse must be positive")


class DriverKind(str, Enum):
    CONSTANT_VOLTAGE = "constant-voltage"
    CONSTANT_CURRENT = "constant-current"


@dataclass(frozen=True)
class DriverMode:
    """Write driver.  ``i_write`` and ``tau_cc_slow`` only matter for constant current.

    ``tau_cc_slow`` is the P->AP switching time under the mirrored current at
    the device's anchor thermal stability.
    """

    kind: DriverKind = DriverKind.CONSTANT_VOLTAGE
    i_write: float = 100e-6
    tau_cc_slow: float = 1.0e-9

    def __post_init__(self):
        object.__setattr__(self, "kind", DriverKind(self.kind))
        if not (self.i_write > 0 and self.tau_cc_slow > 0):
            raise ParameterError("i_write and tau_cc_slow must be positive")

    @property
    def constant_current(self) -> bool:
        return self.kind is DriverKind.CONSTANT_CURRENT


CONSTANT_VOLTAGE = DriverMode()
CONSTANT_CURRENT = DriverMode(kind=DriverKind.CONSTANT_CURRENT)


@dataclass(frozen=True, eq=False)
class CurrentTrace:
    """Uniformly sampled supply-current magnitude; sample ``k`` is at ``t0 + k / sample_rate``."""

    samples: np.ndarray = field(repr=False)
    sample_rate: float = DEFAULT_SAMPLE_RATE
    t0: float = 0.0
    width: int | None = None
    driver: str | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ParameterError("trace samples must be a non-empty 1-D sequence")
        if np.any(s < 0):
            raise ParameterError("trace samples are magnitudes and must be >= 0")
        object.__setattr__(self, "samples", s)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def end(self) -> float:
        return self.t0 + self.samples.size / self.sample_rate

    def same_as(self, other: "CurrentTrace") -> bool:
        return (
            self.sample_rate == other.sample_rate
            and self.t0 == other.t0
            and self.width == other.width
            and self.driver == other.driver
            and np.array_equal(self.samples, other.samples)
        )


Devices = Union[DeviceParams, PvSample]


@dataclass(frozen=True)
class WriteTransaction:
    old: Word
    new: Word
    driver: DriverMode = CONSTANT_VOLTAGE
    devices: Devices = DeviceParams()
    env: Environment = Environment()

    def __post_init__(self):
        if self.old.width != self.new.width:
            raise ParameterError("old and new words must have the same width")
        if isinstance(self.devices, PvSample) and len(self.devices) != self.old.width:
            raise ParameterError(
                f"{len(self.devices)} device realizations for a {self.old.width}-bit word"
            )


def _nominal(devices: Devices) -> DeviceParams:
    return devices.nominal if isinstance(devices, PvSample) else devices


def _cells(devices: Devices, width: int, temperature: float):
    """Per-bit (delta, r_low, r_high) arrays."""
    if isinstance(devices, PvSample):
        if len(devices) != width:
            raise ParameterError(f"{len(devices)} device realizations for a {width}-bit word")
        return devices.deltas(temperature), devices.r_low, devices.r_low * (1.0 + devices.tmr)
    delta = thermal_stability(devices, temperature)
    ones = np.ones(width)
    return delta * ones, devices.r_low * ones, devices.r_high * ones


def _switch_time(delta, dir_factor, params: DeviceParams, driver: DriverMode, tamper: float):
    # same operation order as device.write_latency so scalar and array paths agree
    if driver.constant_current:
        base = driver.tau_cc_slow * (delta / params.delta0) * dir_factor
    else:
        base = params.tau0 * (delta / params.delta0) * (1.0 / params.v_supply) * dir_factor
    return base * tamper


def nominal_switch_time(
    params: DeviceParams,
    driver: DriverMode,
    direction: Direction,
    env: Environment = Environment(),
) -> float:
    """Switching time of a nominal cell in ``env`` (temperature and tamper applied)."""
    d = 1.0 if direction is Direction.P_TO_AP else params.dir_asymmetry
    return float(
        _switch_time(thermal_stability(params, env.temperature), d, params, driver,
                     env.magnetic_tamper_factor)
    )


def default_wordline_pulse(params: DeviceParams, driver: DriverMode) -> float:
    """Design-time pulse: ``PULSE_MARGIN`` times the slowest nominal switch at 300 K."""
    return PULSE_MARGIN * nominal_switch_time(params, driver, Direction.P_TO_AP)


def resolve_pulse(env: Environment, params: DeviceParams, driver: DriverMode) -> float:
    if env.wordline_pulse is None:
        return default_wordline_pulse(params, driver)
    slowest = nominal_switch_time(params, driver, Direction.P_TO_AP)
    if env.wordline_pulse < slowest:
        raise ParameterError(
            f"wordline_pulse {env.wordline_pulse:.4g} s is shorter than the slowest "
            f"nominal switch time {slowest:.4g} s"
        )
    return env.wordline_pulse


def per_bit_switch_time(
    old_bit: int,
    new_bit: int,
    device: DeviceParams,
    env: Environment = Environment(),
    driver: DriverMode = CONSTANT_VOLTAGE,
    pulse: float | None = None,
) -> float | None:
    """Switch time of one cell in seconds, or ``None`` when the bit does not change.

    Raises :class:`WriteFailure` when the cell would not switch within the
    wordline pulse (``pulse`` defaults to the one resolved from ``env``).
    """
    if old_bit not in (0, 1) or new_bit not in (0, 1):
        raise ParameterError("bits must be 0 or 1")
    if old_bit == new_bit:
        return None
    d = 1.0 if Direction.of(old_bit, new_bit) is Direction.P_TO_AP else device.dir_asymmetry
    t = float(_switch_time(thermal_stability(device, env.temperature), d, device, driver,
                           env.magnetic_tamper_factor))
    if pulse is None:
        pulse = resolve_pulse(env, device, driver)
    if t > pulse:
        raise WriteFailure(0, t, pulse)
    return t


def switch_times(
    old: Word,
    new: Word,
    devices: Devices,
    env: Environment,
    driver: DriverMode,
    pulse: float,
) -> np.ndarray:
    """Per-bit switch times; ``inf`` for bits that keep their value."""
    o, n = old.array(), new.array()
    delta, _, _ = _cells(devices, old.width, env.temperature)
    params = _nominal(devices)
    dir_factor = np.where(n == 1, 1.0, params.dir_asymmetry)
    t = _switch_time(delta, dir_factor, params, driver, env.magnetic_tamper_factor)
    t = np.where(o != n, t, np.inf)
    late = np.flatnonzero(np.isfinite(t) & (t > pulse))
    if late.size:
        i = int(late[0])
        raise WriteFailure(i, float(t[i]), pulse)
    return t


def _n_samples(pulse: float, sample_rate: float) -> int:
    # tolerance absorbs pulse*rate landing a hair above an integer
    return max(1, math.ceil(pulse * sample_rate - 1e-9))


def _sum_bits(contrib: np.ndarray) -> np.ndarray:
    return np.sort(contrib, axis=1).sum(axis=1)


def add_noise(samples: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive white Gaussian noise, rectified so magnitudes stay >= 0."""
    if sigma < 0:
        raise ParameterError("noise sigma must be >= 0")
    if sigma == 0:
        return samples
    return np.maximum(samples + rng.normal(0.0, sigma, size=samples.shape), 0.0)


def synthesize_write_trace(
    txn: WriteTransaction,
    noise_sigma: float = 0.0,
    seed: int = 0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    smoothing_tau: float | None = None,
) -> CurrentTrace:
    params = _nominal(txn.devices)
    pulse = resolve_pulse(txn.env, params, txn.driver)
    width = txn.old.width
    t_switch = switch_times(txn.old, txn.new, txn.devices, txn.env, txn.driver, pulse)
    n_samples = _n_samples(pulse, sample_rate)
    times = np.arange(n_samples) / sample_rate

    if txn.driver.constant_current:
        contrib = np.full((n_samples, width), txn.driver.i_write)
    else:
        _, r_low, r_high = _cells(txn.devices, width, txn.env.temperature)
        v = params.v_write_eff
        i_old = np.where(txn.old.array() == 1, v / r_high, v / r_low)
        i_new = np.where(txn.new.array() == 1, v / r_high, v / r_low)
        after = times[:, None] >= t_switch[None, :]
        if smoothing_tau is None:
            contrib = np.where(after, i_new[None, :], i_old[None, :])
        else:
            if not smoothing_tau > 0:
                raise ParameterError("smoothing_tau must be positive")
            with np.errstate(invalid="ignore"):
                decay = np.exp(-np.maximum(times[:, None] - t_switch[None, :], 0.0) / smoothing_tau)
            settled = i_new[None, :] + (i_old - i_new)[None, :] * decay
            contrib = np.where(after, settled, i_old[None, :])

    samples = _sum_bits(contrib)
    samples = add_noise(samples, noise_sigma, np.random.default_rng(seed))
    return CurrentTrace(samples, sample_rate, 0.0, width, txn.driver.kind.value)


def synthesize_read_trace(
    word: Word,
    devices: Devices = DeviceParams(),
    env: Environment = Environment(),
    noise_sigma: float = 0.0,
    seed: int = 0,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    driver: DriverMode = CONSTANT_VOLTAGE,
) -> CurrentTrace:
    """Flat read trace at the sum of per-cell read currents, over one wordline pulse."""
    params = _nominal(devices)
    pulse = resolve_pulse(env, params, driver)
    _, r_low, r_high = _cells(devices, word.width, env.temperature)
    # read current = fraction * v / r_low * (r_low / R(state)), per cell
    i_read_p = params.read_current_fraction * params.v_write_eff / r_low
    i_read = np.where(word.array() == 1, i_read_p * (r_low / r_high), i_read_p)
    n_samples = _n_samples(pulse, sample_rate)
    samples = _sum_bits(np.broadcast_to(i_read, (n_samples, word.width)))
    samples = add_noise(samples, noise_sigma, np.random.default_rng(seed))
    return CurrentTrace(samples, sample_rate, 0.0, word.width, "read")


def sample_window(trace: CurrentTrace, window: Sequence[float]) -> float:
    """Mean of the samples whose time falls in ``[t_start, t_end]``."""
    t_start, t_end = window
    if not t_end > t_start:
        raise WindowError(f"window end {t_end} must exceed start {t_start}")
    if t_start < trace.t0 or t_end > trace.end:
        raise WindowError(f"window [{t_start}, {t_end}] outside trace [{trace.t0}, {trace.end}]")
    times = trace.times
    mask = (times >= t_start) & (times <= t_end)
    if not mask.any():
        raise WindowError(f"no samples in window [{t_start}, {t_end}]")
    return float(trace.samples[mask].mean())


def average_traces(traces: Sequence[CurrentTrace]) -> CurrentTrace:
    """Point-wise mean of traces of identical shape and timing."""
    if not traces:
        raise ParameterError("need at least one trace")
    first = traces[0]
    for tr in traces[1:]:
        if (tr.samples.shape != first.samples.shape or tr.sample_rate != first.sample_rate
                or tr.t0 != first.t0):
            raise ParameterError("traces differ in shape or timing and cannot be averaged")
    if len(traces) == 1:
        return first
    # averaging deviations from the first trace keeps identical inputs bit-exact
    stack = np.stack([tr.samples for tr in traces])
    mean = np.maximum(first.samples + np.mean(stack - first.samples, axis=0), 0.0)
    return CurrentTrace(mean, first.sample_rate, first.t0, first.width, first.driver)
