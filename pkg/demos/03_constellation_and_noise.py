"""
Biased ASK constellations and sampling noise
=============================================

The smallest amplitude must keep the diode conducting, so the constellations
are biased: amplitudes start at 0.5 V and are spaced so the average power
is 5/16.
"""

import numpy as np

from swipt_rectifier import CircuitParams
from swipt_rectifier.modem import (
    LinkConfig,
    average_symbol_power,
    build_constellation,
    modulate,
    noise_sigma,
    sample_symbols,
    transmit_block,
)

bask = build_constellation(2, 0.5, 5 / 16)
qask = build_constellation(4, 0.5, 5 / 16)
print("BASK amplitudes", bask.amplitudes, "P_av =", average_symbol_power(bask))
print("QASK amplitudes", np.round(qask.amplitudes, 6), "spacing", np.diff(qask.amplitudes)[0])
print("QASK Gray labels", [format(b, "02b") for b in qask.bit_map])

# Noise is referred to the average symbol power, per bit
for db in (0, 10, 20):
    print(f"Eb/N0 = {db:2d} dB -> sigma = {noise_sigma(average_symbol_power(bask), 10 ** (db / 10), 1):.4f} V")

# One block through the rectifier, sampled at the end of every symbol
params = CircuitParams()
cfg = LinkConfig(symbol_period=6.25e-6, block_length=6, eb_n0=10.0, rng_seed=3)
bits = np.array([1, 0, 1, 1, 0, 0])
x = transmit_block(modulate(bits, bask), cfg, params)
sigma = noise_sigma(average_symbol_power(bask), cfg.eb_n0, bask.bits_per_symbol)
samples = sample_symbols(x, sigma, cfg.rng_seed)
print("noiseless", np.round(samples.noiseless, 4))
print("noisy    ", np.round(samples.noisy, 4))
