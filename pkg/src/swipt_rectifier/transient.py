"""Transient analysis of the rectifier by chaining closed-form segments.

The sample loop follows the classic two-state procedure: evaluate the active
segment's closed form at every sample, check the diode predicate, and on a flip
restart the segment from the current time and voltage. With ``refine=True`` the
flip instant is additionally located by bisection inside the last sample
interval, which removes the sampling bias of the switch time.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .circuit import CircuitParams, DiodeState, Drive, Trajectory, derive_constants
from .errors import NoConvergenceError, NotConductingError

_GRID_EPS = 1e-6  # fraction of a sample interval treated as coincident
MAX_DEFAULT_HORIZON = 5e-3  # near-open loads approach the plateau algebraically, not exponentially


@njit(cache=True)
def _phase(t, freq):
    cycles = t * freq
    return 2.0 * math.pi * (cycles - math.floor(cycles))


@njit(cache=True)
def _flip(state, vs, vc, von, ron, rs, roff):
    if state == 1:
        return (vs - vc - von) * ron / (rs + ron) < 0.0
    return (vs - vc) * roff / (rs + roff) >= von


@njit(cache=True)
def _forced(t, amp, state, coef, freq):
    ph = _phase(t, freq)
    return -amp * (coef[state, 2] * math.cos(ph) - coef[state, 3] * math.sin(ph))


@njit(cache=True)
def _seg(t, t0, c0, amp, state, coef, freq):
    return coef[state, 1] + _forced(t, amp, state, coef, freq) + math.exp(-coef[state, 0] * (t - t0)) * c0


@njit(cache=True)
def _seg_const(v0, t0, amp, state, coef, freq):
    return v0 - coef[state, 1] - _forced(t0, amp, state, coef, freq)


@njit(cache=True)
def _propagate_kernel(dt, k_start, k_end, t_start, v_start, state_start, bounds, amps,
                      freq, coef, von, ron, rs, roff, refine, store,
                      out_v, out_s, ev_t, ev_s, bound_v):
    eps = _GRID_EPS * dt
    n_bounds = bounds.shape[0]
    t0 = t_start
    grid0 = k_start * dt
    if abs(t0 - grid0) <= eps:
        t0 = grid0
    state = state_start
    p = 0
    amp = amps[0]
    c0 = _seg_const(v_start, t0, amp, state, coef, freq)
    t_prev = t0
    v = v_start
    n_ev = 0
    k = k_start + 1
    if store:
        out_v[0] = v_start
        out_s[0] = state
    while True:
        t_k = k * dt if k <= k_end else math.inf
        if p < n_bounds and bounds[p] < t_k - eps:
            t = bounds[p]
            is_sample = False
            is_bound = True
        else:
            if k > k_end:
                break
            t = t_k
            is_sample = True
            is_bound = p < n_bounds and abs(bounds[p] - t_k) <= eps
        v = _seg(t, t0, c0, amp, state, coef, freq)
        for _ in range(8):
            vs = amp * math.sin(_phase(t, freq))
            if not _flip(state, vs, v, von, ron, rs, roff):
                break
            if refine:
                lo = t_prev
                hi = t
                for _it in range(200):
                    mid = 0.5 * (lo + hi)
                    if mid <= lo or mid >= hi:
                        break
                    vm = _seg(mid, t0, c0, amp, state, coef, freq)
                    if _flip(state, amp * math.sin(_phase(mid, freq)), vm, von, ron, rs, roff):
                        hi = mid
                    else:
                        lo = mid
                ts = hi
                vsw = _seg(hi, t0, c0, amp, state, coef, freq)
            else:
                ts = t
                vsw = v
            state = 1 - state
            if n_ev < ev_t.shape[0]:
                ev_t[n_ev] = ts
                ev_s[n_ev] = state
            n_ev += 1
            t0 = ts
            c0 = _seg_const(vsw, ts, amp, state, coef, freq)
            t_prev = ts
            if not refine:
                break
            v = _seg(t, t0, c0, amp, state, coef, freq)
        if is_sample:
            if store:
                j = k - k_start
                out_v[j] = v
                out_s[j] = state
            k += 1
        if is_bound:
            bound_v[p] = v
            p += 1
            if p < n_bounds:
                amp = amps[p]
                t0 = t
                c0 = _seg_const(v, t, amp, state, coef, freq)
        t_prev = t
    return n_ev, v, state


def _coefficients(params: CircuitParams):
    k = derive_constants(params)
    coef = np.empty((2, 4))
    for state, rate, tau, offset in (
        (0, k.beta, k.t_off, 0.0),
        (1, k.alpha, k.t_on, -params.diode_threshold / (k.alpha * k.t_on)),
    ):
        denom = tau * (rate ** 2 + k.omega ** 2)
        coef[state] = (rate, offset, k.omega / denom, rate / denom)
    return coef


def _check_finite_params(params: CircuitParams):
    for name in ("capacitance", "source_resistance", "on_resistance", "off_resistance",
                 "load_resistance", "diode_threshold", "carrier_frequency"):
        if not math.isfinite(getattr(params, name)):
            raise ValueError(f"non-finite circuit parameter {name}")


def propagate(params: CircuitParams, drive: Drive, *, samples_per_period: float = 100,
              initial_voltage: float = 0.0, initial_state: DiodeState = DiodeState.OFF,
              start_time: float = 0.0, refine: bool = False, store: bool = True):
    """Run the segment-chaining loop and return raw arrays.

    Time is absolute: samples sit on the global grid ``k / (samples_per_period * f)``
    and ``start_time`` places the beginning of ``drive`` on that timeline.
    Returns a dict with ``voltage`` at the end of every drive piece,
    ``final_voltage``, ``final_state`` and, when ``store`` is set, the sampled
    trajectory.
    """
    _check_finite_params(params)
    if samples_per_period < 2:
        raise ValueError("samples_per_period must be at least 2")
    if not math.isfinite(initial_voltage) or not math.isfinite(start_time):
        raise ValueError("initial_voltage and start_time must be finite")
    if start_time < 0:
        raise ValueError("start_time must be non-negative")
    dt = 1.0 / (samples_per_period * params.carrier_frequency)
    bounds = start_time + drive.boundaries
    k_start = int(math.floor(start_time / dt + _GRID_EPS))
    k_end = int(math.floor(bounds[-1] / dt + _GRID_EPS))
    n = k_end - k_start + 1 if store else 0
    out_v = np.empty(n)
    out_s = np.empty(n, dtype=np.int8)
    bound_v = np.empty(len(bounds))
    coef = _coefficients(params)
    capacity = (2 * (k_end - k_start)) // max(int(samples_per_period) // 4, 1) + 4 * len(bounds) + 16
    while True:
        ev_t = np.empty(capacity if store else 0)
        ev_s = np.empty(capacity if store else 0, dtype=np.int8)
        n_ev, v_end, s_end = _propagate_kernel(
            dt, k_start, k_end, float(start_time), float(initial_voltage), int(initial_state),
            bounds, drive.amplitudes, float(params.carrier_frequency), coef,
            float(params.diode_threshold), float(params.on_resistance),
            float(params.source_resistance), float(params.off_resistance),
            bool(refine), bool(store), out_v, out_s, ev_t, ev_s, bound_v)
        if not store or n_ev <= capacity:
            break
        capacity = n_ev + 16
    result = {"voltage": bound_v, "final_voltage": float(v_end), "final_state": DiodeState(int(s_end)),
              "n_events": int(n_ev)}
    if store:
        times = np.arange(k_start, k_end + 1) * dt
        times[0] = start_time
        result.update(times=times, samples=out_v, states=out_s,
                      event_times=ev_t[:n_ev].copy(), event_states=ev_s[:n_ev].copy())
    return result


def simulate_transient(params: CircuitParams, drive: Drive, samples_per_period: float = 100,
                       initial_voltage: float = 0.0, *, refine: bool = False,
                       start_time: float = 0.0) -> Trajectory:
    """Capacitor voltage over ``drive`` starting from a blocking diode.

    Parameters
    ----------
    params : CircuitParams
    drive : Drive
        Amplitude schedule; the carrier phase is continuous across pieces.
    samples_per_period : float
        Samples per carrier period; the diode predicate is checked at each one.
    initial_voltage : float
        Capacitor voltage at ``start_time``. The diode always starts off; a
        stale state is corrected at the first check.
    refine : bool
        Bisect each detected switch back to its crossing instant.

    Returns
    -------
    Trajectory
    """
    raw = propagate(params, drive, samples_per_period=samples_per_period,
                    initial_voltage=initial_voltage, start_time=start_time, refine=refine)
    return Trajectory(
        sample_times=raw["times"],
        output_voltage=raw["samples"],
        event_times=raw["event_times"],
        event_states=raw["event_states"],
        samples_per_period=samples_per_period,
        final_state=raw["final_state"],
        diode_state=raw["states"],
    )


def _one_period(params, amplitude, v, samples_per_period, refine):
    drive = Drive.constant(amplitude, params.carrier_period)
    return propagate(params, drive, samples_per_period=samples_per_period, initial_voltage=v,
                     refine=refine, store=False)["final_voltage"]


def periodic_orbit(params: CircuitParams, amplitude: float, samples_per_period: int = 100,
                   refine: bool = False) -> Trajectory:
    """One carrier period of the periodic steady state under constant ``amplitude``.

    The start voltage is the fixed point of the one-period map, found with a
    bracketing root solver on ``[0, amplitude]``.
    """
    v_star = brentq(lambda v: _one_period(params, amplitude, v, samples_per_period, refine) - v,
                    0.0, amplitude, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return simulate_transient(params, Drive.constant(amplitude, params.carrier_period),
                              samples_per_period, v_star, refine=refine)


def _conducts(params: CircuitParams, amplitude: float) -> bool:
    rs, roff = params.source_resistance, params.off_resistance
    return amplitude > params.diode_threshold and amplitude * roff / (rs + roff) >= params.diode_threshold


def steady_state_output(params: CircuitParams, amplitude: float, rel_tolerance: float = 1e-3, *,
                        samples_per_period: int = 100, refine: bool = False,
                        horizon: float | None = None, settle_time: bool = True):
    """Steady output level ``a`` and settle time ``t0`` for a constant drive.

    ``a`` is the mean capacitor voltage over one period of the periodic orbit.
    ``t0`` is the end of the first carrier period, starting from an empty
    capacitor, whose mean voltage lies within ``rel_tolerance`` of ``a``.
    Pass ``settle_time=False`` to skip the from-empty run (``t0`` is then None).
    The default horizon is ``100 Rl C`` capped at :data:`MAX_DEFAULT_HORIZON`.
    """
    if not _conducts(params, amplitude):
        raise NotConductingError(f"amplitude {amplitude} V never turns the diode on")
    if not 0 < rel_tolerance < 1:
        raise ValueError("rel_tolerance must lie in (0, 1)")
    orbit = periodic_orbit(params, amplitude, samples_per_period, refine)
    a = float(np.mean(orbit.output_voltage[1:]))
    if not settle_time:
        return a, None
    if horizon is None:
        horizon = min(100.0 * params.load_resistance * params.capacitance, MAX_DEFAULT_HORIZON)
    n = int(samples_per_period)
    period = params.carrier_period
    chunk_periods = 4096
    t, v, state = 0.0, 0.0, DiodeState.OFF
    done = 0
    while done * period < horizon:
        drive = Drive.constant(amplitude, chunk_periods * period)
        raw = propagate(params, drive, samples_per_period=samples_per_period, initial_voltage=v,
                        initial_state=state, start_time=t, refine=refine)
        means = raw["samples"][1:].reshape(chunk_periods, n).mean(axis=1)
        hit = np.flatnonzero(np.abs(means - a) <= rel_tolerance * abs(a))
        if hit.size:
            return a, (done + hit[0] + 1) * period
        done += chunk_periods
        t = done * period
        v, state = raw["final_voltage"], raw["final_state"]
    raise NoConvergenceError(f"output did not settle within {horizon:.3g} s")
