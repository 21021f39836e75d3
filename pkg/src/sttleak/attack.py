"""Supply-current adversary: SPA level quantization, DPA averaging, leakage metrics.

The attacker knows the nominal device parameters, the driver and the
environment it may itself have set up (cooling, a tamper magnet), so its
level table and sampling windows are computed rather than learned.  Process
variation in the victim array is not in the table and acts as noise.

Windows, relative to wordline assertion:

* pre-switch: ``[5 %, 80 %]`` of the fastest nominal switch time, where every
  cell still holds the old value;
* post-switch: from ``120 %`` of the slowest nominal switch time to the end of
  the wordline pulse, where every cell holds the new value.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .device import DeviceParams, Direction, ParameterError
from .encoding import NONE, EncodingScheme, encode, level_class_sizes
from .trace import (
    CONSTANT_VOLTAGE,
    DEFAULT_SAMPLE_RATE,
    CurrentTrace,
    Devices,
    DriverMode,
    Environment,
    WindowError,
    Word,
    WriteTransaction,
    add_noise,
    average_traces,
    nominal_switch_time,
    resolve_pulse,
    sample_window,
    synthesize_write_trace,
)


@dataclass(frozen=True)
class AttackConfig:
    """What the attacker knows about the array it is probing.

    ``word_width`` is the number of cells written together, i.e. the encoded
    width when an encoding scheme is active.
    """

    word_width: int
    driver: DriverMode = CONSTANT_VOLTAGE
    params: DeviceParams = DeviceParams()
    env: Environment = Environment()
    sample_rate: float = DEFAULT_SAMPLE_RATE
    pre_window: tuple[float, float] = (0.05, 0.80)
    post_start: float = 1.20

    def __post_init__(self):
        if self.word_width < 1:
            raise ParameterError("word_width must be >= 1")
        lo, hi = self.pre_window
        if not (0 <= lo < hi < 1):
            raise ParameterError("pre-switch window fractions must satisfy 0 <= lo < hi < 1")
        if not self.post_start >= 1:
            raise ParameterError("post-switch window must start after the slowest switch")

    @property
    def i_p(self) -> float:
        return self.params.v_write_eff / self.params.r_low

    @property
    def i_ap(self) -> float:
        return self.params.v_write_eff / self.params.r_high

    @property
    def level_gap(self) -> float:
        return self.i_p - self.i_ap

    def levels(self) -> np.ndarray:
        """Expected current for Hamming weight ``m = 0..n``: ``(n - m) I_P + m I_AP``."""
        m = np.arange(self.word_width + 1)
        return (self.word_width - m) * self.i_p + m * self.i_ap

    @property
    def pulse(self) -> float:
        return resolve_pulse(self.env, self.params, self.driver)

    def windows(self) -> tuple[tuple[float, float], tuple[float, float]]:
        fastest = nominal_switch_time(self.params, self.driver, Direction.AP_TO_P, self.env)
        slowest = nominal_switch_time(self.params, self.driver, Direction.P_TO_AP, self.env)
        pulse = self.pulse
        if slowest >= pulse:
            raise WindowError("expected switch time reaches the pulse end; no post-switch window")
        # keep half the remaining pulse when the nominal post offset would overrun it
        post_start = min(self.post_start * slowest, 0.5 * (slowest + pulse))
        return (self.pre_window[0] * fastest, self.pre_window[1] * fastest), (post_start, pulse)


@dataclass(frozen=True)
class AttackInference:
    hw_old_est: int | None
    hw_new_est: int | None
    residual_candidates: int
    effort_bits: float = field(init=False)
    low_confidence: bool = False
    level_old: float = float("nan")
    level_new: float = float("nan")

    def __post_init__(self):
        if self.residual_candidates < 1:
            raise ParameterError("residual_candidates must be >= 1")
        object.__setattr__(self, "effort_bits", math.log2(self.residual_candidates))

    @property
    def unknown(self) -> bool:
        return self.hw_old_est is None or self.hw_new_est is None


def _quantize(level: float, config: AttackConfig) -> tuple[int, bool]:
    table = config.levels()
    m = int(np.argmin(np.abs(table - level)))
    return m, bool(abs(table[m] - level) > 0.5 * config.level_gap)


def spa_infer(trace: CurrentTrace, config: AttackConfig) -> AttackInference:
    """Single-trace inference of the old and new Hamming weights."""
    if trace.width is not None and trace.width != config.word_width:
        raise ParameterError(f"trace of width {trace.width} vs config width {config.word_width}")
    if trace.driver is not None and trace.driver != config.driver.kind.value:
        raise ParameterError(f"trace driver {trace.driver!r} vs config {config.driver.kind.value!r}")
    n = config.word_width
    if config.driver.constant_current:
        return AttackInference(None, None, 1 << (2 * n))
    pre, post = config.windows()
    level_old = sample_window(trace, pre)
    level_new = sample_window(trace, post)
    hw_old, flag_old = _quantize(level_old, config)
    hw_new, flag_new = _quantize(level_new, config)
    return AttackInference(
        hw_old,
        hw_new,
        math.comb(n, hw_old) * math.comb(n, hw_new),
        low_confidence=flag_old or flag_new,
        level_old=level_old,
        level_new=level_new,
    )


def dpa_infer(traces: Sequence[CurrentTrace], config: AttackConfig) -> AttackInference:
    """Average repeated traces of one transaction, then run :func:`spa_infer`."""
    return spa_infer(average_traces(traces), config)


def candidate_space(
    inference: AttackInference,
    width: int,
    scheme: EncodingScheme = NONE,
) -> tuple[int, float]:
    """Number of (old, new) data-word pairs consistent with the inferred levels.

    ``width`` is the data width.  An unknown level, or one the scheme can
    never produce, leaves all ``2**width`` words of that direction possible.
    """
    sizes = level_class_sizes(width, scheme)
    full = 1 << width

    def one(level):
        if level is None:
            return full
        return sizes.get(level, 0) or full

    count = one(inference.hw_old_est) * one(inference.hw_new_est)
    return count, math.log2(count)


@dataclass
class CampaignReport:
    trials: int
    accuracy_old: float
    accuracy_new: float
    mean_effort_bits: float
    seed: int
    width: int
    scheme: str
    driver: str
    noise_sigma: float
    traces_per_trial: int
    records: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self, config_hash: str | None = None) -> dict:
        return {
            "trials": self.trials,
            "accuracy_old": self.accuracy_old,
            "accuracy_new": self.accuracy_new,
            "mean_effort_bits": self.mean_effort_bits,
            "config_hash": config_hash,
            "seed": self.seed,
            "width": self.width,
            "scheme": self.scheme,
            "driver": self.driver,
            "noise_sigma": self.noise_sigma,
            "traces_per_trial": self.traces_per_trial,
        }


def attack_campaign(
    config: AttackConfig,
    scheme: EncodingScheme = NONE,
    n_trials: int = 1000,
    noise_sigma: float = 0.0,
    seed: int = 0,
    traces_per_trial: int = 1,
    devices: Devices | None = None,
    workers: int = 1,
) -> CampaignReport:
    """Run ``n_trials`` independent attacks on uniformly random (old, new) data.

    ``config.word_width`` is the data width here; the campaign widens it by
    the scheme overhead for the attacker's view of the trace.  Each trial
    draws from its own stream derived from ``(seed, trial)``, so results do
    not depend on ``workers``.  When the inference is unknown the attacker's
    answer is a uniform guess over the possible encoded weights.
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    if traces_per_trial < 1:
        raise ParameterError("traces_per_trial must be >= 1")
    n = config.word_width
    n_enc = scheme.encoded_width(n)
    phys = replace(config, word_width=n_enc)
    victim = config.params if devices is None else devices

    def trial(i: int) -> dict:
        rng = np.random.default_rng((seed, i))
        old = Word(tuple(int(b) for b in rng.integers(0, 2, size=n)))
        new = Word(tuple(int(b) for b in rng.integers(0, 2, size=n)))
        enc_old = encode(old, scheme, seed=int(rng.integers(0, 2**62)))
        enc_new = encode(new, scheme, seed=int(rng.integers(0, 2**62)))
        txn = WriteTransaction(enc_old, enc_new, config.driver, victim, config.env)
        clean = synthesize_write_trace(txn, 0.0, sample_rate=config.sample_rate)
        shots = add_noise(
            np.broadcast_to(clean.samples, (traces_per_trial, clean.samples.size)),
            noise_sigma,
            rng,
        )
        traces = [CurrentTrace(s, clean.sample_rate, clean.t0, clean.width, clean.driver)
                  for s in shots]
        inf = dpa_infer(traces, phys)
        _, bits = candidate_space(inf, n, scheme)
        guess_old = inf.hw_old_est
        guess_new = inf.hw_new_est
        if guess_old is None:
            guess_old = int(rng.integers(0, n_enc + 1))
        if guess_new is None:
            guess_new = int(rng.integers(0, n_enc + 1))
        return {
            "trial": i,
            "old": str(old),
            "new": str(new),
            "hw_old": enc_old.hamming_weight,
            "hw_new": enc_new.hamming_weight,
            "hw_old_est": inf.hw_old_est,
            "hw_new_est": inf.hw_new_est,
            "correct_old": guess_old == enc_old.hamming_weight,
            "correct_new": guess_new == enc_new.hamming_weight,
            "effort_bits": bits,
            "low_confidence": inf.low_confidence,
        }

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(trial, range(n_trials)))
    else:
        records = [trial(i) for i in range(n_trials)]

    return CampaignReport(
        trials=n_trials,
        accuracy_old=sum(r["correct_old"] for r in records) / n_trials,
        accuracy_new=sum(r["correct_new"] for r in records) / n_trials,
        mean_effort_bits=math.fsum(r["effort_bits"] for r in records) / n_trials,
        seed=seed,
        width=n,
        scheme=str(scheme),
        driver=config.driver.kind.value,
        noise_sigma=noise_sigma,
        traces_per_trial=traces_per_trial,
        records=records,
    )
