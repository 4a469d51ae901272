"""Half-wave rectifier model: parameters, per-segment closed forms and diode switching.

The rectifier is a sinusoidal source with series resistance ``Rs`` feeding a
piecewise-linear diode (``Ron`` above the threshold ``Von``, ``Roff`` below it)
into a capacitor ``C`` shunted by the load ``Rl``. Within a segment where the
diode state is fixed the capacitor voltage obeys a first-order linear ODE that
has a closed-form solution; the functions here evaluate those solutions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

OPEN_LOAD_OHMS = 10e6
"""Finite resistance used in place of an open-circuit load."""


class DiodeState(enum.IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class CircuitParams:
    """Physical constants of the rectifier.

    ``load_resistance`` accepts ``"open"`` (or ``None``), which is replaced by
    :data:`OPEN_LOAD_OHMS`.
    """

    capacitance: float = 10e-9
    source_resistance: float = 50.0
    on_resistance: float = 5.0
    off_resistance: float = 10e6
    load_resistance: Union[float, str, None] = 1e3
    diode_threshold: float = 0.25
    carrier_frequency: float = 800e6

    def __post_init__(self):
        if self.load_resistance is None or self.load_resistance == "open":
            object.__setattr__(self, "load_resistance", OPEN_LOAD_OHMS)
        values = {
            "capacitance": self.capacitance,
            "source_resistance": self.source_resistance,
            "on_resistance": self.on_resistance,
            "off_resistance": self.off_resistance,
            "load_resistance": self.load_resistance,
            "diode_threshold": self.diode_threshold,
            "carrier_frequency": self.carrier_frequency,
        }
        for name, value in values.items():
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
        for name in ("capacitance", "source_resistance", "on_resistance",
                     "off_resistance", "load_resistance", "carrier_frequency"):
            if values[name] <= 0:
                raise ValueError(f"{name} must be positive, got {values[name]!r}")
        if self.off_resistance <= self.on_resistance:
            raise ValueError("off_resistance must exceed on_resistance")
        if self.diode_threshold < 0:
            raise ValueError("diode_threshold must be non-negative")

    @property
    def carrier_period(self) -> float:
        return 1.0 / self.carrier_frequency


@dataclass(frozen=True)
class DerivedConstants:
    omega: float
    t_on: float
    t_off: float
    alpha: float
    beta: float


def derive_constants(params: CircuitParams) -> DerivedConstants:
    c = params.capacitance
    t_on = c * (params.source_resistance + params.on_resistance)
    t_off = c * (params.source_resistance + params.off_resistance)
    load_rate = 1.0 / (params.load_resistance * c)
    return DerivedConstants(
        omega=2.0 * math.pi * params.carrier_frequency,
        t_on=t_on,
        t_off=t_off,
        alpha=1.0 / t_on + load_rate,
        beta=1.0 / t_off + load_rate,
    )


@dataclass(frozen=True)
class SegmentStart:
    """Initial condition of one fixed-state stretch of the transient."""

    start_time: float
    start_voltage: float
    state: DiodeState
    drive_amplitude: float


def carrier_phase(t, frequency: float):
    """Return ``omega * t`` reduced to ``[0, 2*pi)``."""
    cycles = np.asarray(t, dtype=float) * frequency
    phase = 2.0 * np.pi * (cycles - np.floor(cycles))
    return phase if phase.ndim else float(phase)


def _forced_term(phase, amplitude, rate, omega, tau):
    return -amplitude * (omega * np.cos(phase) - rate * np.sin(phase)) / (tau * (rate ** 2 + omega ** 2))


def _segment_voltage(t, seg, rate, tau, offset, omega, frequency):
    t = np.asarray(t, dtype=float)
    forced0 = _forced_term(carrier_phase(seg.start_time, frequency), seg.drive_amplitude, rate, omega, tau)
    forced = _forced_term(carrier_phase(t, frequency), seg.drive_amplitude, rate, omega, tau)
    decay = np.exp(-rate * (t - seg.start_time))
    v = offset + forced + decay * (seg.start_voltage - offset - forced0)
    return v if v.ndim else float(v)


def segment_voltage_on(t, seg: SegmentStart, k: DerivedConstants, von: float):
    """Capacitor voltage at ``t`` while the diode conducts.

    Solves ``dV/dt + alpha V = (Vs - Von) / Ton`` from ``seg``. ``t`` may be a
    scalar or an array; times before ``seg.start_time`` are extrapolated.
    """
    frequency = k.omega / (2.0 * math.pi)
    offset = -von / (k.alpha * k.t_on)
    return _segment_voltage(t, seg, k.alpha, k.t_on, offset, k.omega, frequency)


def segment_voltage_off(t, seg: SegmentStart, k: DerivedConstants):
    """Capacitor voltage at ``t`` while the diode blocks (``dV/dt + beta V = Vs / Toff``)."""
    frequency = k.omega / (2.0 * math.pi)
    return _segment_voltage(t, seg, k.beta, k.t_off, 0.0, k.omega, frequency)


def diode_switch_predicate(state: DiodeState, vs: float, vc: float, params: CircuitParams) -> bool:
    """True when the diode must leave ``state`` given source and capacitor voltages."""
    rs, von = params.source_resistance, params.diode_threshold
    if state == DiodeState.ON:
        ron = params.on_resistance
        return (vs - vc - von) * ron / (rs + ron) < 0.0
    roff = params.off_resistance
    return (vs - vc) * roff / (rs + roff) >= von


def branch_currents(state: DiodeState, vs: float, vc: float, dvc_dt: float, params: CircuitParams):
    """Diode, capacitor and load currents for one operating point.

    The diode current follows the circuit branch of the active state: through
    ``Rs + Ron`` with the threshold drop when on, through ``Rs + Roff`` when
    off. Returns ``(i_diode, i_cap, i_load)``; values broadcast over arrays.
    """
    rs, von = params.source_resistance, params.diode_threshold
    vs, vc = np.asarray(vs, dtype=float), np.asarray(vc, dtype=float)
    on = np.asarray(state) == DiodeState.ON
    i_on = (vs - vc - von) / (rs + params.on_resistance)
    i_off = (vs - vc) / (rs + params.off_resistance)
    i_diode = np.where(on, i_on, i_off)
    i_cap = params.capacitance * np.asarray(dvc_dt, dtype=float)
    i_load = vc / params.load_resistance
    if i_diode.ndim == 0:
        return float(i_diode), float(i_cap), float(i_load)
    return i_diode, i_cap, i_load


@dataclass(frozen=True)
class Drive:
    """Piecewise-constant amplitude schedule for ``Vs(t) = A(t) sin(omega t)``.

    The carrier phase is global: amplitude changes never reset it.
    """

    durations: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        durations = np.atleast_1d(np.asarray(self.durations, dtype=float))
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if durations.shape != amplitudes.shape or durations.ndim != 1:
            raise ValueError("durations and amplitudes must be 1-D arrays of equal length")
        if durations.size == 0:
            raise ValueError("drive schedule is empty")
        if not (np.all(np.isfinite(durations)) and np.all(np.isfinite(amplitudes))):
            raise ValueError("drive schedule contains non-finite values")
        if np.any(durations <= 0):
            raise ValueError("drive durations must be positive")
        if np.any(amplitudes < 0):
            raise ValueError("drive amplitudes must be non-negative")
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def constant(cls, amplitude: float, duration: float) -> "Drive":
        return cls(np.array([duration]), np.array([amplitude]))

    @classmethod
    def from_symbols(cls, amplitudes, symbol_period: float) -> "Drive":
        amplitudes = np.asarray(amplitudes, dtype=float)
        return cls(np.full(amplitudes.shape, float(symbol_period)), amplitudes)

    @property
    def total_duration(self) -> float:
        return float(np.sum(self.durations))

    @property
    def boundaries(self) -> np.ndarray:
        """End time of each piece, measured from the start of the drive."""
        return np.cumsum(self.durations)

    @property
    def max_amplitude(self) -> float:
        return float(np.max(self.amplitudes))


@dataclass(frozen=True)
class Trajectory:
    sample_times: np.ndarray
    output_voltage: np.ndarray
    event_times: np.ndarray
    event_states: np.ndarray
    samples_per_period: float
    final_state: DiodeState = DiodeState.OFF
    diode_state: np.ndarray = field(default=None, repr=False)

    @property
    def switch_events(self):
        return [(float(t), DiodeState(int(s))) for t, s in zip(self.event_times, self.event_states)]

    def __len__(self):
        return len(self.sample_times)
