import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sttleak.device import (
    K_B,
    SECONDS_PER_YEAR,
    RETENTION_CAP_S,
    BitState,
    CellMode,
    DeviceParams,
    Direction,
    ParameterError,
    RetentionFit,
    cell_current,
    resistance,
    retention_saturated,
    retention_time,
    scale_volume,
    thermal_stability,
    write_latency,
)

NOMINAL = DeviceParams()


def test_thermal_stability_hand_evaluated():
    # 2.59e4 * (40e-9)^2 * 4e-9 / (1.380649e-23 * 300)
    p = DeviceParams(k_u=2.59e4)
    hand = 2.59e4 * 1.6e-15 * 4e-9 / (1.380649e-23 * 300.0)
    assert thermal_stability(p, 300.0) == pytest.approx(hand, rel=1e-12)
    assert thermal_stability(p, 300.0) == pytest.approx(40.0, rel=1e-3)


def test_thermal_stability_defaults_anchor():
    assert thermal_stability(NOMINAL, 300.0) == pytest.approx(40.0, rel=1e-9)


def test_thermal_stability_scaling_examples():
    assert thermal_stability(NOMINAL, 250.0) == pytest.approx(48.0, rel=1e-12)
    half = DeviceParams(thickness=2e-9)
    assert thermal_stability(half, 300.0) == pytest.approx(20.0, rel=1e-12)


@pytest.mark.parametrize("temperature", [0.0, -5.0])
def test_thermal_stability_rejects_bad_temperature(temperature):
    with pytest.raises(ParameterError):
        thermal_stability(NOMINAL, temperature)


def test_geometry_must_be_positive():
    with pytest.raises(ParameterError):
        DeviceParams(thickness=0.0)
    with pytest.raises(ParameterError):
        DeviceParams(area=-1e-15)


def test_retention_examples():
    fit = RetentionFit(c=1.34e-9, k=1.0)
    t40 = retention_time(40.0, fit)
    assert t40 == pytest.approx(3.15e8, rel=2e-3)
    assert 9.9 <= t40 / SECONDS_PER_YEAR <= 10.1
    assert retention_time(20.0, fit) == pytest.approx(1.34e-9 * math.exp(20), rel=1e-12)
    assert retention_time(20.0, fit) == pytest.approx(0.650, abs=1e-3)
    assert retention_time(0.0, RetentionFit(c=3e-9, k=2.0)) == 3e-9


def test_retention_saturates():
    fit = RetentionFit()
    assert retention_time(1e4, fit) == RETENTION_CAP_S
    assert retention_saturated(1e4, fit)
    assert not retention_saturated(40.0, fit)
    with pytest.raises(ParameterError):
        retention_time(-1.0, fit)


def test_retention_log_linear_with_slope_k():
    fit = RetentionFit(c=2e-9, k=1.3)
    grid = np.linspace(0, 40, 41)
    logs = np.log([retention_time(d, fit) for d in grid])
    assert np.all(np.diff(logs) > 0)
    np.testing.assert_allclose(np.diff(logs), 1.3, rtol=1e-9)


def test_write_latency_examples():
    assert write_latency(40.0, 1.0, Direction.P_TO_AP, NOMINAL) == pytest.approx(0.59e-9, rel=1e-12)
    assert write_latency(20.0, 1.0, Direction.P_TO_AP, NOMINAL) == pytest.approx(0.295e-9, rel=1e-12)
    assert write_latency(40.0, 1.0, Direction.AP_TO_P, NOMINAL) == pytest.approx(0.354e-9, rel=1e-12)


def test_write_latency_preconditions():
    with pytest.raises(ParameterError):
        write_latency(0.0, 1.0, Direction.P_TO_AP, NOMINAL)
    with pytest.raises(ParameterError):
        write_latency(40.0, 0.0, Direction.P_TO_AP, NOMINAL)


def test_resistance_examples():
    assert resistance(BitState.P, NOMINAL) == 5e3
    assert resistance(BitState.AP, DeviceParams(tmr=1.0)) == 10e3
    assert resistance(BitState.AP, DeviceParams(tmr=0.5)) == 7.5e3


def test_cell_current_examples():
    assert cell_current(BitState.P, CellMode.WRITE, NOMINAL) == pytest.approx(150e-6)
    assert cell_current(BitState.AP, CellMode.WRITE, NOMINAL) == pytest.approx(75e-6)
    assert cell_current(BitState.P, CellMode.READ, NOMINAL) == pytest.approx(30e-6)
    assert cell_current(BitState.AP, CellMode.READ, NOMINAL) == pytest.approx(15e-6)


def test_read_disturb_guard_in_params():
    with pytest.raises(ParameterError):
        DeviceParams(read_current_fraction=0.5, tmr=1.0)


def test_scale_volume_examples():
    assert scale_volume(NOMINAL, 1) is NOMINAL
    half = scale_volume(NOMINAL, 0.5)
    assert thermal_stability(half) == pytest.approx(20.0, rel=1e-12)
    assert retention_time(thermal_stability(half)) == pytest.approx(0.650, abs=1e-3)
    with pytest.raises(ParameterError):
        scale_volume(NOMINAL, 0.0)


def test_bitstate_mapping():
    assert BitState.from_bit(0) is BitState.P
    assert BitState.from_bit(1) is BitState.AP
    assert Direction.of(0, 1) is Direction.P_TO_AP
    assert Direction.of(1, 0) is Direction.AP_TO_P


devices = st.builds(
    DeviceParams,
    k_u=st.floats(1e4, 1e5),
    area=st.floats(1e-16, 1e-14),
    thickness=st.floats(1e-9, 1e-8),
    tmr=st.floats(0.1, 3.0),
    r_low=st.floats(1e3, 2e4),
    v_write_eff=st.floats(0.1, 1.5),
    read_current_fraction=st.floats(0.01, 0.24),
    dir_asymmetry=st.floats(0.1, 1.0),
)
temps = st.floats(50.0, 500.0)


@given(devices, temps, temps)
def test_inverse_temperature_law(p, t1, t2):
    assert thermal_stability(p, t1) / thermal_stability(p, t2) == pytest.approx(t2 / t1, rel=1e-12)


@given(devices, st.floats(1.0, 100.0), st.floats(0.2, 2.0), st.floats(0.2, 2.0))
def test_latency_times_voltage_constant(p, delta, v1, v2):
    for d in Direction:
        a = write_latency(delta, v1, d, p) * v1
        b = write_latency(delta, v2, d, p) * v2
        assert a == pytest.approx(b, rel=1e-12)


@given(devices)
def test_ap_write_current_is_p_over_one_plus_tmr(p):
    ip = cell_current(BitState.P, CellMode.WRITE, p)
    iap = cell_current(BitState.AP, CellMode.WRITE, p)
    assert iap == pytest.approx(ip / (1 + p.tmr), rel=1e-12)


@given(devices)
def test_read_below_both_write_currents(p):
    w = min(cell_current(s, CellMode.WRITE, p) for s in BitState)
    assert max(cell_current(s, CellMode.READ, p) for s in BitState) < w


@settings(max_examples=50)
@given(devices, st.floats(100.0, 400.0), st.floats(1.0, 50.0))
def test_colder_increases_delta_latency_retention(p, t, drop):
    warm, cold = thermal_stability(p, t), thermal_stability(p, t - drop * 0.9)
    assert cold > warm
    assert write_latency(cold, 1.0, Direction.P_TO_AP, p) > write_latency(warm, 1.0, Direction.P_TO_AP, p)
    assert retention_time(cold) >= retention_time(warm)


@given(devices, st.floats(0.1, 3.0))
def test_scale_volume_scales_delta(p, f):
    assert thermal_stability(scale_volume(p, f)) == pytest.approx(f * thermal_stability(p), rel=1e-12)


def test_boltzmann_constant():
    assert K_B == 1.380649e-23
