"""Countermeasure analysis: state counting, posterior leakage, SNVM retention scaling.

A "state" is a distinct final current level, i.e. a distinct encoded
Hamming weight of the new data.  The old-data level is handled by
:func:`sttleak.attack.candidate_space` and is not counted twice here.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .attack import AttackInference, candidate_space
from .device import (
    REFERENCE_TEMPERATURE,
    BitState,
    CellMode,
    DeviceParams,
    Direction,
    ParameterError,
    RetentionFit,
    cell_current,
    retention_saturated,
    retention_time,
    scale_volume,
    thermal_stability,
    write_latency,
)
from .encoding import EncodingScheme, data_weight_counts, joint_counts, level_probabilities
from .trace import CONSTANT_VOLTAGE, MAX_WIDTH, DriverMode


@dataclass(frozen=True)
class StateReport:
    data_width: int
    scheme: str
    driver: str
    states_uncoded: int
    states_encoded: int
    reduction_pct: float | None  # None for random schemes under constant voltage
    unique_decodable_fraction: float
    mean_posterior_entropy_bits: float


def _observable(width: int, scheme: EncodingScheme, driver: DriverMode) -> dict:
    """``{observable: {data weight: multiplicity}}``; constant current collapses all levels."""
    table = joint_counts(width, scheme)
    if not driver.constant_current:
        return table
    merged: dict[int, int] = {}
    for by_w in table.values():
        for w, c in by_w.items():
            merged[w] = merged.get(w, 0) + c
    return {0: merged}


def _posterior_entropy(table: dict) -> float:
    total = sum(sum(by_w.values()) for by_w in table.values())
    h = 0.0
    for by_w in table.values():
        p_level = sum(by_w.values())
        for c in by_w.values():
            if c:
                h += c / total * math.log2(p_level / c)
    return h


def enumerate_states(
    data_width: int,
    scheme: EncodingScheme,
    driver: DriverMode = CONSTANT_VOLTAGE,
) -> StateReport:
    if not 1 <= data_width <= MAX_WIDTH:
        raise ParameterError(f"data_width must lie in [1, {MAX_WIDTH}]")
    table = _observable(data_width, scheme, driver)
    states_uncoded = data_width + 1
    states = len(table)
    if scheme.deterministic or driver.constant_current:
        reduction = 100.0 * (states_uncoded - states) / states_uncoded
    else:
        reduction = None
    producers = {lvl: [w for w, c in by_w.items() if c] for lvl, by_w in table.items()}
    unique = {ws[0] for ws in producers.values() if len(ws) == 1}
    return StateReport(
        data_width=data_width,
        scheme=str(scheme),
        driver=driver.kind.value,
        states_uncoded=states_uncoded,
        states_encoded=states,
        reduction_pct=reduction,
        unique_decodable_fraction=len(unique) / states_uncoded,
        mean_posterior_entropy_bits=_posterior_entropy(table),
    )


def mean_effort_bits(data_width: int, scheme: EncodingScheme, driver: DriverMode = CONSTANT_VOLTAGE) -> float:
    """Expected ``log2`` residual candidates over uniform (old, new) data.

    Old and new words are independent, so the expectation over level pairs
    equals the expectation over ``(l, l)`` pairs.
    """
    if driver.constant_current:
        return candidate_space(AttackInference(None, None, 1), data_width, scheme)[1]
    total = 0.0
    for lvl, p in level_probabilities(data_width, scheme).items():
        inf = AttackInference(lvl, lvl, 1)
        total += p * candidate_space(inf, data_width, scheme)[1]
    return total


@dataclass(frozen=True)
class SnvmRow:
    factor: float
    delta: float
    retention_s: float
    retention_saturated: bool
    write_latency_s: float
    write_current_a: float
    level_gap_a: float


def snvm_profile(
    params: DeviceParams,
    volume_factors: Iterable[float],
    temperature: float = REFERENCE_TEMPERATURE,
    fit: RetentionFit = RetentionFit(),
) -> list[SnvmRow]:
    """Retention, latency and current of volume-scaled cells.

    Write current and level gap are the parallel-state write current and the
    P/AP gap scaled by ``delta / delta0``: the drive needed to switch a cell
    in a fixed time grows linearly with its thermal stability.
    """
    rows = []
    i_p = cell_current(BitState.P, CellMode.WRITE, params)
    i_ap = cell_current(BitState.AP, CellMode.WRITE, params)
    for f in volume_factors:
        dev = scale_volume(params, f)
        delta = thermal_stability(dev, temperature)
        scale = delta / params.delta0
        rows.append(SnvmRow(
            factor=float(f),
            delta=delta,
            retention_s=retention_time(delta, fit),
            retention_saturated=retention_saturated(delta, fit),
            write_latency_s=float(write_latency(delta, params.v_supply, Direction.P_TO_AP, params)),
            write_current_a=i_p * scale,
            level_gap_a=(i_p - i_ap) * scale,
        ))
    return rows


@dataclass(frozen=True)
class MatrixRow:
    width: int
    scheme: str
    driver: str
    states: int
    reduction_pct: float | None
    unique_decodable_fraction: float
    mean_posterior_entropy_bits: float
    mean_effort_bits: float

    def as_dict(self) -> dict:
        return asdict(self)


MATRIX_COLUMNS = (
    "width", "scheme", "driver", "states", "reduction_pct",
    "unique_decodable_fraction", "mean_posterior_entropy_bits", "mean_effort_bits",
)


def defense_matrix(
    width_list: Sequence[int],
    scheme_list: Sequence[EncodingScheme],
    driver_list: Sequence[DriverMode] = (CONSTANT_VOLTAGE,),
) -> list[MatrixRow]:
    if not (width_list and scheme_list and driver_list):
        raise ParameterError("width, scheme and driver lists must be non-empty")
    rows = []
    for scheme in scheme_list:
        for driver in driver_list:
            for w in width_list:
                rep = enumerate_states(w, scheme, driver)
                rows.append(MatrixRow(
                    width=w,
                    scheme=str(scheme),
                    driver=driver.kind.value,
                    states=rep.states_encoded,
                    reduction_pct=rep.reduction_pct,
                    unique_decodable_fraction=rep.unique_decodable_fraction,
                    mean_posterior_entropy_bits=rep.mean_posterior_entropy_bits,
                    mean_effort_bits=mean_effort_bits(w, scheme, driver),
                ))
    return rows


def parity_reduction_closed_form(width: int) -> float:
    """Parity reduction percentage without enumeration: ``floor(n/2) / (n + 1)``.

    Parity leaves ``ceil(n/2) + 1`` even encoded weights out of ``n + 1``.
    """
    return 100.0 * (width // 2) / (width + 1)


def weight_prior_entropy(width: int) -> float:
    """Entropy of the data Hamming weight under uniform data."""
    nw = data_weight_counts(width)
    total = 1 << width
    return sum(c / total * math.log2(total / c) for c in nw)
