import math

import numpy as np
import pytest

from swipt_rectifier import (
    CircuitParams,
    DiodeState,
    Drive,
    SegmentStart,
    branch_currents,
    derive_constants,
    diode_switch_predicate,
    segment_voltage_off,
    segment_voltage_on,
    simulate_transient,
)
from swipt_rectifier.circuit import OPEN_LOAD_OHMS

# Pure-python RK4 (40k steps over one carrier period) on the branch ODEs.
ON_ONE_PERIOD_FROM_TURN_ON = -5.683398565813e-4
OFF_ONE_PERIOD_FROM_HALF_VOLT = 0.499937497656650


class TestDerivedConstants:
    def test_t_on(self, circuit):
        assert derive_constants(circuit).t_on == pytest.approx(5.5e-7, rel=1e-15)

    def test_omega(self, circuit):
        assert derive_constants(circuit).omega == 2 * math.pi * 800e6
        assert derive_constants(circuit).omega == pytest.approx(1.6 * math.pi * 1e9, rel=1e-15)

    def test_alpha(self, circuit):
        assert derive_constants(circuit).alpha == pytest.approx(1 / 5.5e-7 + 1 / 1e-5, rel=1e-14)
        assert derive_constants(circuit).alpha == pytest.approx(1918181.8181818, rel=1e-12)

    def test_orderings(self, circuit):
        k = derive_constants(circuit)
        assert k.t_off > k.t_on > 0
        assert k.alpha > k.beta > 0


class TestParams:
    def test_open_sentinel(self):
        assert CircuitParams(load_resistance="open").load_resistance == OPEN_LOAD_OHMS
        assert CircuitParams(load_resistance=None).load_resistance == OPEN_LOAD_OHMS

    @pytest.mark.parametrize("kw", [
        {"capacitance": 0.0},
        {"source_resistance": -1.0},
        {"off_resistance": 1.0},
        {"diode_threshold": -0.1},
        {"carrier_frequency": float("nan")},
        {"load_resistance": float("inf")},
    ])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            CircuitParams(**kw)


class TestSegments:
    def test_on_continuity_at_start(self, circuit):
        k = derive_constants(circuit)
        seg = SegmentStart(3.3e-6, 0.42, DiodeState.ON, 1.0)
        assert segment_voltage_on(3.3e-6, seg, k, 0.25) == pytest.approx(0.42, abs=1e-15)

    def test_off_continuity_at_start(self, circuit):
        k = derive_constants(circuit)
        seg = SegmentStart(7.1e-6, 0.3, DiodeState.OFF, 0.8)
        assert segment_voltage_off(7.1e-6, seg, k) == pytest.approx(0.3, abs=1e-15)

    def test_on_matches_rk4(self, circuit):
        k = derive_constants(circuit)
        t0 = math.asin(0.25) / k.omega
        seg = SegmentStart(t0, 0.0, DiodeState.ON, 1.0)
        v = segment_voltage_on(t0 + circuit.carrier_period, seg, k, 0.25)
        assert v == pytest.approx(ON_ONE_PERIOD_FROM_TURN_ON, abs=1e-9)

    def test_off_matches_rk4(self, circuit):
        k = derive_constants(circuit)
        seg = SegmentStart(0.0, 0.5, DiodeState.OFF, 1.0)
        v = segment_voltage_off(circuit.carrier_period, seg, k)
        assert v == pytest.approx(OFF_ONE_PERIOD_FROM_HALF_VOLT, abs=1e-9)

    def test_on_long_time_limit(self, circuit):
        k = derive_constants(circuit)
        seg = SegmentStart(0.0, 0.9, DiodeState.ON, 1.0)
        t = np.linspace(1e-3, 1e-3 + circuit.carrier_period, 50)
        v = segment_voltage_on(t, seg, k, 0.25)
        centre = -0.25 / (k.alpha * k.t_on)
        forced = 1.0 / (k.t_on * math.sqrt(k.alpha ** 2 + k.omega ** 2))
        assert np.all(np.abs(v - centre) <= forced * (1 + 1e-9))
        assert np.mean(v) == pytest.approx(centre, abs=forced * 0.1)

    def test_off_free_decay(self, circuit):
        params = CircuitParams(off_resistance=1e15)
        k = derive_constants(params)
        seg = SegmentStart(1e-6, 0.6, DiodeState.OFF, 0.0)
        t = np.array([1e-6, 3e-6, 11e-6])
        expected = 0.6 * np.exp(-k.beta * (t - 1e-6))
        np.testing.assert_allclose(segment_voltage_off(t, seg, k), expected, rtol=1e-12)

    @pytest.mark.parametrize("state", [DiodeState.ON, DiodeState.OFF])
    def test_ode_residual(self, circuit, state):
        # central differences with a tiny step; the truncation error is ~1e-3 V/s
        k = derive_constants(circuit)
        seg = SegmentStart(2e-6, 0.37, state, 0.9)
        t = 2e-6 + np.linspace(1e-10, 3e-9, 40)
        h = 1e-14
        if state == DiodeState.ON:
            f = lambda x: segment_voltage_on(x, seg, k, 0.25)
            rate, tau, drop = k.alpha, k.t_on, 0.25
        else:
            f = lambda x: segment_voltage_off(x, seg, k)
            rate, tau, drop = k.beta, k.t_off, 0.0
        dv = (f(t + h) - f(t - h)) / (2 * h)
        vs = 0.9 * np.sin(k.omega * t)
        residual = dv + rate * f(t) - (vs - drop) / tau
        scale = np.max(np.abs(dv)) + rate * 0.37
        assert np.max(np.abs(residual)) <= 2e-5 * scale


class TestPredicate:
    def test_off_stays_off_at_zero(self, circuit):
        assert not diode_switch_predicate(DiodeState.OFF, 0.0, 0.0, circuit)

    def test_off_turns_on(self, circuit):
        assert diode_switch_predicate(DiodeState.OFF, 1.0, 0.0, circuit)

    def test_on_turns_off(self, circuit):
        assert diode_switch_predicate(DiodeState.ON, 0.2, 0.1, circuit)

    def test_on_stays_on(self, circuit):
        assert not diode_switch_predicate(DiodeState.ON, 0.9, 0.5, circuit)

    def test_hysteresis_band(self, circuit):
        # between Von and Von (1 + Rs/Roff) neither state wants to flip
        vs = 0.25 * (1 + 0.5 * 50 / 10e6)
        assert not diode_switch_predicate(DiodeState.OFF, vs, 0.0, circuit)
        assert not diode_switch_predicate(DiodeState.ON, vs, 0.0, circuit)


class TestBranchCurrents:
    def test_zero_input(self, circuit):
        assert branch_currents(DiodeState.OFF, 0.0, 0.0, 0.0, circuit) == (0.0, 0.0, 0.0)

    def test_load_current(self, circuit):
        _, _, i_load = branch_currents(DiodeState.OFF, 0.0, 0.5, 0.0, circuit)
        assert i_load == pytest.approx(0.5e-3)

    def test_kirchhoff_along_trajectory(self, circuit):
        spp = 4000
        traj = simulate_transient(circuit, Drive.constant(1.0, 5 * circuit.carrier_period), spp,
                                  initial_voltage=0.3, refine=True)
        t, v, s = traj.sample_times, traj.output_voltage, traj.diode_state
        dt = t[2] - t[1]
        dv = (v[2:] - v[:-2]) / (2 * dt)
        inner = slice(1, -1)
        near_event = np.zeros(len(t), dtype=bool)
        for te in traj.event_times:
            near_event |= np.abs(t - te) <= 2.5 * dt
        keep = ~near_event[inner]
        vs = np.sin(2 * np.pi * circuit.carrier_frequency * t[inner])
        i_d, i_c, i_l = branch_currents(s[inner], vs, v[inner], dv, circuit)
        scale = np.max(np.abs(i_d))
        assert np.max(np.abs((i_d - i_c - i_l)[keep])) <= 1e-5 * scale


class TestDrive:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Drive(np.array([]), np.array([]))

    @pytest.mark.parametrize("durations, amplitudes", [([1e-6, 0.0], [1, 1]), ([1e-6], [-1.0]),
                                                         ([np.nan], [1.0])])
    def test_rejects_invalid(self, durations, amplitudes):
        with pytest.raises(ValueError):
            Drive(np.array(durations), np.array(amplitudes))

    def test_boundaries(self):
        d = Drive.from_symbols([0.5, 1.0, 0.5], 2e-6)
        np.testing.assert_allclose(d.boundaries, [2e-6, 4e-6, 6e-6])
        assert d.total_duration == pytest.approx(6e-6)
