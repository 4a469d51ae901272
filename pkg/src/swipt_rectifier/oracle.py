"""Fixed-step RK4 reference integrator for the rectifier.

Independent of the closed-form path: it integrates the Kirchhoff ODE of the
active diode branch directly from the circuit elements. A diode flip detected
at the end of a step is located by bisecting the step length, re-integrating
from the start of the step each time, then the remainder of the step is
integrated in the new state.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .circuit import CircuitParams, DiodeState, Drive, Trajectory

MIN_STEPS_PER_PERIOD = 200


@njit(cache=True)
def _source(t, amp, freq):
    cycles = t * freq
    return amp * math.sin(2.0 * math.pi * (cycles - math.floor(cycles)))


@njit(cache=True)
def _rhs(t, v, state, amp, freq, c, rs, ron, roff, rl, von):
    vs = _source(t, amp, freq)
    if state == 1:
        i_in = (vs - von - v) / (rs + ron)
    else:
        i_in = (vs - v) / (rs + roff)
    return (i_in - v / rl) / c


@njit(cache=True)
def _rk4(t, v, h, state, amp, freq, c, rs, ron, roff, rl, von):
    k1 = _rhs(t, v, state, amp, freq, c, rs, ron, roff, rl, von)
    k2 = _rhs(t + 0.5 * h, v + 0.5 * h * k1, state, amp, freq, c, rs, ron, roff, rl, von)
    k3 = _rhs(t + 0.5 * h, v + 0.5 * h * k2, state, amp, freq, c, rs, ron, roff, rl, von)
    k4 = _rhs(t + h, v + h * k3, state, amp, freq, c, rs, ron, roff, rl, von)
    return v + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@njit(cache=True)
def _must_flip(state, t, v, amp, freq, rs, ron, roff, von):
    vs = _source(t, amp, freq)
    if state == 1:
        return vs - v - von < 0.0
    return (vs - v) * roff / (rs + roff) >= von


@njit(cache=True)
def _advance(t, v, h, state, amp, freq, c, rs, ron, roff, rl, von, localize, ev_t, ev_s, n_ev):
    """Advance one step of length h, handling at most a few diode flips inside it."""
    t_end = t + h
    for _ in range(8):
        rem = t_end - t
        if rem <= 0.0:
            break
        v_new = _rk4(t, v, rem, state, amp, freq, c, rs, ron, roff, rl, von)
        if not _must_flip(state, t_end, v_new, amp, freq, rs, ron, roff, von):
            return v_new, state, n_ev
        if localize:
            lo = 0.0
            hi = rem
            for _it in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                vm = _rk4(t, v, mid, state, amp, freq, c, rs, ron, roff, rl, von)
                if _must_flip(state, t + mid, vm, amp, freq, rs, ron, roff, von):
                    hi = mid
                else:
                    lo = mid
            v = _rk4(t, v, hi, state, amp, freq, c, rs, ron, roff, rl, von)
            t = t + hi
        else:
            v = v_new
            t = t_end
        state = 1 - state
        if n_ev < ev_t.shape[0]:
            ev_t[n_ev] = t
            ev_s[n_ev] = state
        n_ev += 1
    return v, state, n_ev


@njit(cache=True)
def _oracle_kernel(h, n_steps, v0, bounds, amps, freq, c, rs, ron, roff, rl, von, localize,
                   out_v, ev_t, ev_s):
    state = 0
    v = v0
    p = 0
    n_ev = 0
    out_v[0] = v
    for j in range(1, n_steps + 1):
        t = (j - 1) * h
        t_next = j * h
        while p < bounds.shape[0] - 1 and bounds[p] < t_next - 1e-9 * h:
            if bounds[p] > t:
                v, state, n_ev = _advance(t, v, bounds[p] - t, state, amps[p], freq, c, rs, ron,
                                          roff, rl, von, localize, ev_t, ev_s, n_ev)
                t = bounds[p]
            p += 1
        v, state, n_ev = _advance(t, v, t_next - t, state, amps[p], freq, c, rs, ron, roff, rl,
                                  von, localize, ev_t, ev_s, n_ev)
        if p < bounds.shape[0] - 1 and abs(bounds[p] - t_next) <= 1e-9 * h:
            p += 1
        out_v[j] = v
    return n_ev, state


def simulate_transient_oracle(params: CircuitParams, drive: Drive, step: float,
                              initial_voltage: float = 0.0, *, localize: bool = True) -> Trajectory:
    """Integrate the rectifier with fixed-step RK4.

    ``step`` must resolve the carrier with at least 200 steps per period.
    With ``localize=False`` flips take effect at step ends only.
    """
    period = params.carrier_period
    if not step > 0 or step > period / MIN_STEPS_PER_PERIOD * (1 + 1e-12):
        raise ValueError(f"step must be positive and at most 1/(200 f) = {period / 200:.4g} s")
    if not math.isfinite(initial_voltage):
        raise ValueError("initial_voltage must be finite")
    n_steps = int(math.floor(drive.total_duration / step + 1e-9))
    out_v = np.empty(n_steps + 1)
    capacity = 4 * int(n_steps / (period / step)) + 4 * len(drive.durations) + 64
    ev_t = np.empty(capacity)
    ev_s = np.empty(capacity, dtype=np.int8)
    n_ev, state = _oracle_kernel(
        float(step), n_steps, float(initial_voltage), drive.boundaries, drive.amplitudes,
        float(params.carrier_frequency), float(params.capacitance), float(params.source_resistance),
        float(params.on_resistance), float(params.off_resistance), float(params.load_resistance),
        float(params.diode_threshold), bool(localize), out_v, ev_t, ev_s)
    n_ev = min(n_ev, capacity)
    return Trajectory(
        sample_times=np.arange(n_steps + 1) * step,
        output_voltage=out_v,
        event_times=ev_t[:n_ev].copy(),
        event_states=ev_s[:n_ev].copy(),
        samples_per_period=period / step,
        final_state=DiodeState(int(state)),
    )


def max_deviation(reference: Trajectory, candidate: Trajectory) -> float:
    """Largest |difference| between two trajectories at their shared sample instants.

    The denser trajectory is decimated onto the coarser one; their sample
    spacings must be integer multiples of each other.
    """
    a, b = reference, candidate
    if len(a) > len(b):
        a, b = b, a
    dt_a = a.sample_times[-1] / (len(a) - 1)
    dt_b = b.sample_times[-1] / (len(b) - 1)
    ratio = int(round(dt_a / dt_b))
    if ratio < 1 or abs(ratio * dt_b - dt_a) > 1e-9 * dt_a:
        raise ValueError("sample grids are not commensurate")
    b_times = b.sample_times[::ratio]
    b_volts = b.output_voltage[::ratio]
    n = min(len(a), len(b_times))
    if not np.allclose(a.sample_times[:n], b_times[:n], rtol=0, atol=1e-6 * dt_a):
        raise ValueError("sample instants do not line up")
    return float(np.max(np.abs(a.output_voltage[:n] - b_volts[:n])))
