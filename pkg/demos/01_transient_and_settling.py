"""
Rectifier output voltage from an empty capacitor
=================================================

A 1 V carrier at 800 MHz charges a 10 nF capacitor through a piecewise-linear
diode. We follow the output for 20 us with a 1 kohm load and with an open
load, then measure how long the loaded rectifier takes to settle.
"""

import numpy as np

from swipt_rectifier import CircuitParams, Drive, simulate_transient, steady_state_output

drive = Drive.constant(1.0, 20e-6)

# the two loads of the reference operating point
loaded = CircuitParams(load_resistance=1e3)
unloaded = CircuitParams(load_resistance="open")

for params, label in ((loaded, "1 kohm"), (unloaded, "open")):
    traj = simulate_transient(params, drive)
    print(f"{label:>6}: {len(traj)} samples, V_C(20 us) = {traj.output_voltage[-1]:.4f} V, "
          f"{len(traj.switch_events)} diode switches")

# The loaded output approaches a periodic steady state. Its level is the
# mean over one carrier period of the periodic orbit; the settle time is the
# end of the first period whose mean is within 0.1 % of that level.
a, t0 = steady_state_output(loaded, 1.0, 1e-3)
print(f"steady level {a:.4f} V reached after {t0 * 1e6:.2f} us")

# Without a load the plateau sits just below the peak minus the diode drop.
a_open, _ = steady_state_output(unloaded, 1.0, settle_time=False)
print(f"open-circuit plateau {a_open:.4f} V (peak - threshold = {1.0 - unloaded.diode_threshold} V)")

# Optional plot of the first few microseconds
try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    traj = simulate_transient(loaded, drive)
    every = 50
    plt.plot(traj.sample_times[::every] * 1e6, traj.output_voltage[::every])
    plt.axhline(a, ls="--", c="k", lw=0.8)
    plt.axvline(t0 * 1e6, ls=":", c="k", lw=0.8)
    plt.xlabel("time [us]")
    plt.ylabel("V_C [V]")
    plt.savefig("transient.svg")
    print("wrote transient.svg")
