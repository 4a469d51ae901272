"""Half-wave rectifier transient model and integrated SWIPT link harness."""

from .circuit import (
    OPEN_LOAD_OHMS,
    CircuitParams,
    DerivedConstants,
    DiodeState,
    Drive,
    SegmentStart,
    Trajectory,
    branch_currents,
    derive_constants,
    diode_switch_predicate,
    segment_voltage_off,
    segment_voltage_on,
)
from .transient import simulate_transient, steady_state_output

__version__ = "0.1.0"
