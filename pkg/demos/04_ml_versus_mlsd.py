"""
Symbol-by-symbol ML against sequence detection
===============================================

With 6.25 us symbols the capacitor has no time to settle, so each output
depends on the symbols before it. Thresholds from the output ranges still
separate the two BASK symbols, but sequence detection over the whole block
uses the memory instead of fighting it.
"""

from swipt_rectifier import CircuitParams
from swipt_rectifier.detection import compute_output_ranges, compute_steady_states
from swipt_rectifier.experiments import ber_curve
from swipt_rectifier.modem import build_constellation

params = CircuitParams()
bask = build_constellation(2, 0.5, 5 / 16)
print("steady levels", compute_steady_states(params, bask).levels)

for ts in (6.25e-6, 12.5e-6, 18.75e-6):
    r = compute_output_ranges(params, bask, ts, 6)
    print(f"Ts = {ts * 1e6:5.2f} us: symbol 0 in [{r.r_min[0]:.4f}, {r.r_max[0]:.4f}], "
          f"symbol 1 in [{r.r_min[1]:.4f}, {r.r_max[1]:.4f}]")

grid = [4.0, 8.0, 12.0]
ml = ber_curve(params, bask, "ML_bounded", 6.25e-6, 1, 6, grid, 200_000, 1)
mlsd = ber_curve(params, bask, "MLSD", 6.25e-6, 6, 6, grid, 200_000, 1)
print(" Eb/N0     ML        MLSD")
for a, b in zip(ml, mlsd):
    print(f"{a.eb_n0_db:5.1f}  {a.ber:.2e}  {b.ber:.2e}")
