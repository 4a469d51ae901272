"""Biased M-ASK modulation, Eb/N0-calibrated sampling noise and block transmission."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import CircuitParams, Drive
from .errors import InfeasibleError, LengthMismatchError
from .transient import propagate


def gray_code(n: int) -> np.ndarray:
    idx = np.arange(n)
    return idx ^ (idx >> 1)


@dataclass(frozen=True)
class Constellation:
    """Ordered amplitude set of a biased M-ASK scheme.

    ``bit_map[k]`` is the integer label (MSB first) carried by ``amplitudes[k]``.
    """

    amplitudes: np.ndarray
    bit_map: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        labels = np.asarray(self.bit_map, dtype=np.int64)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        if amps.size != labels.size:
            raise ValueError("bit_map must label every amplitude")
        if np.any(amps <= 0) or np.any(np.diff(amps) <= 0):
            raise ValueError("amplitudes must be positive and strictly increasing")
        m = amps.size
        if m > 1 and (m & (m - 1)):
            raise ValueError("order must be a power of two")
        if sorted(labels.tolist()) != list(range(m)):
            raise ValueError("bit_map must be a permutation of 0..M-1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "bit_map", labels)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "Constellation":
        amplitudes = np.asarray(amplitudes, dtype=float)
        return cls(amplitudes, gray_code(amplitudes.size))

    @property
    def order(self) -> int:
        return int(self.amplitudes.size)

    @property
    def min_amplitude(self) -> float:
        return float(self.amplitudes[0])

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    def label_bits(self) -> np.ndarray:
        """``(M, bits_per_symbol)`` array of the bits carried by each amplitude index."""
        b = self.bits_per_symbol
        shifts = np.arange(b - 1, -1, -1)
        return (self.bit_map[:, None] >> shifts) & 1

    def check_circuit(self, params: CircuitParams):
        if self.min_amplitude <= params.diode_threshold:
            raise ValueError(
                f"minimum amplitude {self.min_amplitude} V does not exceed the diode threshold "
                f"{params.diode_threshold} V")


@dataclass(frozen=True)
class LinkConfig:
    symbol_period: float
    block_length: int = 6
    sequence_window: int = 6
    eb_n0: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.symbol_period > 0:
            raise ValueError("symbol_period must be positive")
        if not 1 <= self.sequence_window <= self.block_length:
            raise ValueError("need 1 <= sequence_window <= block_length")
        if not self.eb_n0 > 0:
            raise ValueError("eb_n0 must be positive")


@dataclass(frozen=True)
class SampledSymbols:
    noiseless: np.ndarray
    noisy: np.ndarray
    sigma: float


def average_symbol_power(c: Constellation) -> float:
    """Mean of ``A_m**2 / 2`` over equiprobable symbols."""
    return float(np.sum(c.amplitudes ** 2) / (2 * c.order))


def build_constellation(order: int, min_amplitude: float, target_avg_power: float) -> Constellation:
    """Equally spaced amplitudes ``A_min + m d`` whose average power hits the target.

    The spacing ``d`` is the positive root of the quadratic
    ``S2 d**2 + 2 A_min S1 d + M A_min**2 - 2 M P = 0`` with ``S1 = sum(m)``
    and ``S2 = sum(m**2)``.
    """
    if order < 2 or order & (order - 1):
        raise ValueError("order must be a power of two and at least 2")
    if not min_amplitude > 0:
        raise ValueError("min_amplitude must be positive")
    m = np.arange(order)
    s1, s2 = float(m.sum()), float((m ** 2).sum())
    a = min_amplitude
    const = order * a * a - 2.0 * order * target_avg_power
    if const >= 0:
        raise InfeasibleError(
            f"target power {target_avg_power} is not above the all-minimum power {a * a / 2}")
    # -const > 0, so the root is positive; this form avoids cancellation
    d = -const / (a * s1 + math.sqrt((a * s1) ** 2 - s2 * const))
    return Constellation(a + m * d, gray_code(order))


def noise_sigma(avg_power: float, eb_n0: float, bits_per_symbol: int) -> float:
    """Sampling-noise standard deviation for a given linear Eb/N0."""
    if math.isinf(eb_n0):
        return 0.0
    return math.sqrt(avg_power / (2.0 * bits_per_symbol * eb_n0))


def bits_to_indices(bits, c: Constellation) -> np.ndarray:
    """Map a flat bit array onto amplitude indices through ``c.bit_map``."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    b = c.bits_per_symbol
    if bits.size % b:
        raise LengthMismatchError(f"{bits.size} bits do not split into {b}-bit symbols")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    groups = bits.reshape(-1, b)
    labels = groups @ (1 << np.arange(b - 1, -1, -1))
    inverse = np.empty(c.order, dtype=np.int64)
    inverse[c.bit_map] = np.arange(c.order)
    return inverse[labels]


def indices_to_bits(indices, c: Constellation) -> np.ndarray:
    return c.label_bits()[np.asarray(indices, dtype=np.int64)].reshape(-1)


def modulate(bits, c: Constellation) -> np.ndarray:
    return c.amplitudes[bits_to_indices(bits, c)]


def transmit_block(amplitudes, cfg: LinkConfig, params: CircuitParams, *,
                   initial_voltage: float = 0.0, samples_per_period: float = 100,
                   refine: bool = False) -> np.ndarray:
    """Noiseless end-of-symbol capacitor voltages for one block.

    Every block starts from an empty capacitor (unless ``initial_voltage`` says
    otherwise); sample ``i`` is taken at ``(i + 1) * symbol_period``.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.size > cfg.block_length:
        raise LengthMismatchError(
            f"block of {amplitudes.size} symbols exceeds block_length {cfg.block_length}")
    if amplitudes.size == 0:
        return np.empty(0)
    if np.any(amplitudes <= params.diode_threshold):
        raise ValueError("every symbol amplitude must exceed the diode threshold")
    drive = Drive.from_symbols(amplitudes, cfg.symbol_period)
    raw = propagate(params, drive, samples_per_period=samples_per_period,
                    initial_voltage=initial_voltage, refine=refine, store=False)
    return raw["voltage"].copy()


def add_noise(x, sigma: float, seed) -> np.ndarray:
    """``x + n`` with i.i.d. zero-mean Gaussian ``n`` drawn from a seeded stream."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    if sigma == 0:
        return x.copy()
    return x + rng.normal(0.0, sigma, size=x.shape)


def sample_symbols(x, sigma: float, seed) -> SampledSymbols:
    x = np.asarray(x, dtype=float)
    return SampledSymbols(noiseless=x, noisy=add_noise(x, sigma, seed), sigma=float(sigma))
