"""Process-variation sampling and worst-case latency extrapolation.

Per-bit variation is drawn in fixed-size blocks, each with its own RNG
stream derived from ``(seed, block index)``.  A bit's realized parameters
therefore depend only on the seed and its index: not on ``count``, the
order blocks are evaluated in, or how many worker threads are used.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .device import (
    REFERENCE_TEMPERATURE,
    DeviceParams,
    Direction,
    ParameterError,
    thermal_stability,
    write_latency,
)

BLOCK_SIZE = 1024
N_BLOCKS_EVT = 50
EULER_GAMMA = 0.5772156649015329

# multipliers are floored here so heavy normal tails never yield negative resistances
_MIN_MULTIPLIER = 1e-3


class Distribution(str, Enum):
    NORMAL = "normal"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class PvModel:
    """Relative spreads of the varied per-bit parameters.

    ``read_tau0`` and ``read_exponent`` parametrize the read-latency model
    ``read_tau0 * (tmr_nominal / tmr_bit) ** read_exponent``: a smaller TMR
    shrinks the sense margin and slows the read.
    """

    sigma_delta_rel: float = 0.05
    sigma_r_rel: float = 0.02
    sigma_tmr_rel: float = 0.065
    distribution: Distribution = Distribution.NORMAL
    read_tau0: float = 0.25e-9
    read_exponent: float = 3.0

    def __post_init__(self):
        for name in ("sigma_delta_rel", "sigma_r_rel", "sigma_tmr_rel"):
            s = getattr(self, name)
            if not (0 <= s < 0.5):
                raise ParameterError(f"{name} must lie in [0, 0.5), got {s!r}")
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if not self.read_tau0 > 0:
            raise ParameterError("read_tau0 must be positive")
        if not self.read_exponent > 0:
            raise ParameterError("read_exponent must be positive")


@dataclass(frozen=True, eq=False)
class PvSample:
    """Realized per-bit parameters.

    Bit ``i`` is the nominal device with its thermal stability multiplied by
    ``delta_mult[i]`` (via free-layer thickness) and with ``r_low[i]`` and
    ``tmr[i]`` replacing the nominal values.
    """

    nominal: DeviceParams
    model: PvModel
    seed: int
    delta_mult: np.ndarray = field(repr=False)
    r_low: np.ndarray = field(repr=False)
    tmr: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.delta_mult)

    def device(self, i: int) -> DeviceParams:
        return replace(
            self.nominal,
            thickness=self.nominal.thickness * float(self.delta_mult[i]),
            r_low=float(self.r_low[i]),
            tmr=float(self.tmr[i]),
        )

    def subset(self, start: int, stop: int) -> "PvSample":
        """Bits ``start..stop-1``, e.g. the cells of one word."""
        if not (0 <= start < stop <= len(self)):
            raise ParameterError(f"bit range [{start}, {stop}) outside sample of {len(self)}")
        return replace(
            self,
            delta_mult=self.delta_mult[start:stop],
            r_low=self.r_low[start:stop],
            tmr=self.tmr[start:stop],
        )

    def deltas(self, temperature: float = REFERENCE_TEMPERATURE) -> np.ndarray:
        return thermal_stability(self.nominal, temperature) * self.delta_mult

    def same_as(self, other: "PvSample") -> bool:
        return (
            self.nominal == other.nominal
            and self.model == other.model
            and self.seed == other.seed
            and np.array_equal(self.delta_mult, other.delta_mult)
            and np.array_equal(self.r_low, other.r_low)
            and np.array_equal(self.tmr, other.tmr)
        )


def _multipliers(z: np.ndarray, sigma: float, distribution: Distribution) -> np.ndarray:
    if sigma == 0:
        return np.ones_like(z)
    if distribution is Distribution.LOGNORMAL:
        s = math.sqrt(math.log1p(sigma * sigma))
        return np.exp(s * z - 0.5 * s * s)
    return np.maximum(1.0 + sigma * z, _MIN_MULTIPLIER)


def _draw_block(seed: int, block: int, model: PvModel) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    z = rng.standard_normal((3, BLOCK_SIZE))
    return np.stack([
        _multipliers(z[0], model.sigma_delta_rel, model.distribution),
        _multipliers(z[1], model.sigma_r_rel, model.distribution),
        _multipliers(z[2], model.sigma_tmr_rel, model.distribution),
    ])


def sample_devices(
    nominal: DeviceParams,
    model: PvModel,
    count: int,
    seed: int,
    workers: int = 1,
) -> PvSample:
    """Draw ``count`` per-bit device realizations.

    The result is a pure function of ``(nominal, model, count, seed)``;
    ``workers`` only changes how many threads generate blocks.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if seed < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    n_blocks = -(-count // BLOCK_SIZE)
    blocks = range(n_blocks)
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            drawn = list(pool.map(lambda b: _draw_block(seed, b, model), blocks))
    else:
        drawn = [_draw_block(seed, b, model) for b in blocks]
    mult = np.concatenate(drawn, axis=1)[:, :count]
    return PvSample(
        nominal=nominal,
        model=model,
        seed=seed,
        delta_mult=mult[0],
        r_low=nominal.r_low * mult[1],
        tmr=nominal.tmr * mult[2],
    )


def nominal_sample(nominal: DeviceParams, count: int) -> PvSample:
    """A zero-variance sample: ``count`` identical copies of ``nominal``."""
    zero = PvModel(sigma_delta_rel=0.0, sigma_r_rel=0.0, sigma_tmr_rel=0.0)
    return sample_devices(nominal, zero, count, seed=0)


@dataclass(frozen=True, eq=False)
class LatencySummary:
    kind: str
    mean: float
    sd: float
    min: float
    max: float
    bin_edges: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    latencies: np.ndarray = field(repr=False)

    def histogram_rows(self) -> list[tuple[float, float, int]]:
        return [
            (float(lo), float(hi), int(c))
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)
        ]


def bit_latencies(sample: PvSample, temperature: float, kind: str) -> np.ndarray:
    """Per-bit write (slow direction) or read latency in seconds."""
    if kind == "write":
        return write_latency(
            sample.deltas(temperature), sample.nominal.v_supply, Direction.P_TO_AP, sample.nominal
        )
    if kind == "read":
        m = sample.model
        return m.read_tau0 * (sample.nominal.tmr / sample.tmr) ** m.read_exponent
    raise ParameterError(f"kind must be 'read' or 'write', got {kind!r}")


def latency_distribution(
    sample: PvSample,
    temperature: float = REFERENCE_TEMPERATURE,
    kind: str = "write",
    bins: int = 50,
) -> LatencySummary:
    lat = bit_latencies(sample, temperature, kind)
    lo, hi = float(lat.min()), float(lat.max())
    if lo == hi:
        edges = np.array([lo, hi])
        counts = np.array([lat.size])
    else:
        edges = np.linspace(lo, hi, bins + 1)
        counts, _ = np.histogram(lat, bins=edges)
    return LatencySummary(
        kind=kind,
        mean=lo if lo == hi else float(np.mean(lat)),
        sd=float(np.std(lat, ddof=1)) if lo != hi else 0.0,
        min=lo,
        max=hi,
        bin_edges=edges,
        counts=counts,
        latencies=lat,
    )


@dataclass(frozen=True)
class TailEstimate:
    population_size: int
    estimated_max: float
    mean: float
    ratio_max_to_mean: float
    method: str
    gaussian_max: float
    sample_max: float
    degenerate: bool = False
    gumbel_loc: float = float("nan")
    gumbel_scale: float = float("nan")
    block_size: int = 0

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "estimated_max": self.estimated_max,
            "mean": self.mean,
            "ratio_max_to_mean": self.ratio_max_to_mean,
            "method": self.method,
            "gaussian_max": self.gaussian_max,
            "gaussian_ratio": self.gaussian_max / self.mean,
            "sample_max": self.sample_max,
            "degenerate": self.degenerate,
            "gumbel_loc": self.gumbel_loc,
            "gumbel_scale": self.gumbel_scale,
            "block_size": self.block_size,
        }


def gaussian_expected_max(mean: float, sd: float, population: float) -> float:
    """Leading-order expected maximum of ``population`` normal draws."""
    return mean + sd * math.sqrt(2.0 * math.log(population))


def gumbel_fit_pwm(maxima) -> tuple[float, float]:
    """Gumbel location and scale by probability-weighted moments.

    Less biased than maximum likelihood on the ~50 block maxima used here.
    """
    m = np.sort(np.asarray(maxima, dtype=float))
    n = m.size
    if n < 2:
        raise ParameterError("need at least two maxima to fit")
    b0 = m.mean()
    b1 = float(np.sum(np.arange(n) * m)) / (n * (n - 1))
    scale = (2.0 * b1 - b0) / math.log(2.0)
    return b0 - EULER_GAMMA * scale, scale


def evt_extrapolate(sample_latencies, target_population: float) -> TailEstimate:
    """Extrapolate the expected worst-case latency to ``target_population`` bits.

    Fits a Gumbel law (probability-weighted moments) to the maxima of ``N_BLOCKS_EVT`` blocks of size
    ``ceil(n / N_BLOCKS_EVT)`` and shifts its location by
    ``scale * log(target / block_size)``, the max-stability property of the
    Gumbel family.  The closed-form normal order statistic is reported
    alongside for cross-checking.
    """
    x = np.asarray(sample_latencies, dtype=float)
    n = x.size
    if n < 1000:
        raise ParameterError(f"need at least 1000 sample points, got {n}")
    if target_population < n:
        raise ParameterError("target_population must be >= the sample size")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    sample_max = float(np.max(x))
    population = int(target_population)

    if sd == 0 or sample_max == float(np.min(x)):
        return TailEstimate(
            population_size=population,
            estimated_max=sample_max,
            mean=mean,
            ratio_max_to_mean=1.0,
            method="gumbel-fit",
            gaussian_max=sample_max,
            sample_max=sample_max,
            degenerate=True,
        )

    block = math.ceil(n / N_BLOCKS_EVT)
    n_full = n // block
    maxima = x[: n_full * block].reshape(n_full, block).max(axis=1)
    loc, scale = gumbel_fit_pwm(maxima)
    gumbel_max = loc + scale * (math.log(population / block) + EULER_GAMMA)
    estimated = max(gumbel_max, sample_max)
    return TailEstimate(
        population_size=population,
        estimated_max=estimated,
        mean=mean,
        ratio_max_to_mean=estimated / mean,
        method="gumbel-fit",
        gaussian_max=gaussian_expected_max(mean, sd, population),
        sample_max=sample_max,
        gumbel_loc=loc,
        gumbel_scale=scale,
        block_size=block,
    )
