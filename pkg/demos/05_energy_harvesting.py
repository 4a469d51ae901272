"""
Harvested power against symbol period
======================================

Average load power over random BASK blocks that start from an empty
capacitor. Short symbols leave no time to discharge towards the low level,
so the capacitor holds more charge on average.
"""

from swipt_rectifier import CircuitParams
from swipt_rectifier.experiments import eh_sweep
from swipt_rectifier.modem import build_constellation

params = CircuitParams()
bask = build_constellation(2, 0.5, 5 / 16)

for r in eh_sweep(params, bask, [6.25e-6, 12.5e-6, 18.75e-6], 6, 100_000, 0):
    print(f"Ts = {r.symbol_period * 1e6:5.2f} us: P_L = {r.avg_sequence_power * 1e6:.3f} uW "
          f"+/- {r.std_error * 1e6:.3f}")
