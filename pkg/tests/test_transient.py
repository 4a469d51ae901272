import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swipt_rectifier import CircuitParams, DiodeState, Drive, derive_constants, simulate_transient
from swipt_rectifier.errors import NoConvergenceError, NotConductingError
from swipt_rectifier.transient import periodic_orbit, propagate, steady_state_output


def test_zero_input_fixed_point(circuit):
    traj = simulate_transient(circuit, Drive.constant(0.0, 2e-6))
    assert np.all(traj.output_voltage == 0.0)
    assert traj.event_times.size == 0


def test_trajectory_invariants(circuit):
    traj = simulate_transient(circuit, Drive.from_symbols([1.0, 0.5, 1.0], 1e-6))
    assert np.all(np.diff(traj.sample_times) > 0)
    assert len(traj.sample_times) == len(traj.output_voltage) == len(traj.diode_state)
    assert np.all(np.isfinite(traj.output_voltage))
    states = traj.event_states
    assert states[0] == DiodeState.ON
    assert np.all(states[1:] != states[:-1])
    assert traj.samples_per_period == 100
    assert len(traj.sample_times) == 3 * 800 * 100 + 1


def test_determinism(circuit):
    d = Drive.from_symbols([1.0, 0.5, 0.5, 1.0], 1.5e-6)
    a = simulate_transient(circuit, d)
    b = simulate_transient(circuit, d)
    assert np.array_equal(a.output_voltage, b.output_voltage)
    assert np.array_equal(a.event_times, b.event_times)


def test_rise_to_steady_state(circuit):
    traj = simulate_transient(circuit, Drive.constant(1.0, 20e-6))
    means = traj.output_voltage[1:].reshape(-1, 100).mean(axis=1)
    assert np.all(np.diff(means) > -1e-12)
    late = means[-800:]
    assert np.ptp(late) < 1e-3 * late.mean()


def test_continuity_across_switches(circuit):
    traj = simulate_transient(circuit, Drive.constant(1.0, 3e-6))
    k = derive_constants(circuit)
    dt = traj.sample_times[2] - traj.sample_times[1]
    ripple_bound = (1.0 + circuit.diode_threshold) / k.t_on * dt
    assert np.max(np.abs(np.diff(traj.output_voltage))) <= ripple_bound


def test_event_voltage_handed_over(circuit):
    # without refinement a switch happens on a sample and the sample keeps the old formula value
    raw = propagate(circuit, Drive.constant(1.0, 50 * circuit.carrier_period))
    idx = np.searchsorted(raw["times"], raw["event_times"])
    np.testing.assert_allclose(raw["times"][idx], raw["event_times"], rtol=0, atol=1e-20)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=4),
       st.floats(0.0, 1.5))
def test_bounded_by_max_amplitude(amplitudes, v0):
    params = CircuitParams()
    drive = Drive.from_symbols(amplitudes, 200 * params.carrier_period)
    v0 = min(v0, drive.max_amplitude)
    traj = simulate_transient(params, drive, initial_voltage=v0)
    assert np.all(np.abs(traj.output_voltage) <= drive.max_amplitude + 1e-12)


def test_boundary_off_grid_matches_split_run(circuit):
    # a drive change between samples, simulated in one go or as two chained runs
    spp, period = 100, circuit.carrier_period
    d1 = 37.3 * period
    full = propagate(circuit, Drive(np.array([d1, 20 * period]), np.array([1.0, 0.5])), store=False)
    first = propagate(circuit, Drive.constant(1.0, d1), store=False)
    second = propagate(circuit, Drive.constant(0.5, 20 * period), initial_voltage=first["final_voltage"],
                       initial_state=first["final_state"], start_time=d1, store=False)
    assert full["voltage"][0] == first["final_voltage"]
    assert full["final_voltage"] == pytest.approx(second["final_voltage"], abs=1e-15)


@pytest.mark.parametrize("kw", [{"samples_per_period": 1}, {"initial_voltage": np.nan}])
def test_rejects_bad_inputs(circuit, kw):
    with pytest.raises(ValueError):
        simulate_transient(circuit, Drive.constant(1.0, 1e-7), **kw)


class TestSteadyState:
    def test_settle_time_rl_1k(self, circuit):
        a, t0 = steady_state_output(circuit, 1.0, 1e-3)
        assert 12e-6 <= t0 <= 18e-6
        assert a == pytest.approx(0.5377, abs=1e-3)

    def test_open_circuit_plateau(self, open_load):
        a, _ = steady_state_output(open_load, 1.0, 1e-3, settle_time=False)
        assert 0.73 <= a <= 0.76
        assert a == pytest.approx(1.0 - 0.25, abs=0.005)

    def test_monotone_in_amplitude(self, circuit):
        amps = np.linspace(0.3, 1.5, 9)
        levels = [steady_state_output(circuit, a, settle_time=False)[0] for a in amps]
        assert np.all(np.diff(levels) > 0)

    def test_orbit_is_periodic(self, circuit):
        orbit = periodic_orbit(circuit, 1.0)
        v = orbit.output_voltage
        assert v[-1] == pytest.approx(v[0], abs=1e-12)

    def test_orbit_mean_matches_long_run(self, circuit):
        a, _ = steady_state_output(circuit, 0.5, settle_time=False)
        traj = simulate_transient(circuit, Drive.constant(0.5, 40e-6))
        assert traj.output_voltage[-100:].mean() == pytest.approx(a, abs=1e-7)

    def test_not_conducting(self, circuit):
        with pytest.raises(NotConductingError):
            steady_state_output(circuit, 0.25)

    def test_no_convergence(self, circuit):
        with pytest.raises(NoConvergenceError):
            steady_state_output(circuit, 1.0, 1e-3, horizon=2e-6)

    def test_bad_tolerance(self, circuit):
        with pytest.raises(ValueError):
            steady_state_output(circuit, 1.0, 1.5)
