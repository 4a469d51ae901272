"""Monte Carlo BER, theoretical error curves and harvested-power metrics.

All Monte Carlo runs are table driven: the noiseless outputs of every block of
``L`` symbols (each block starts from an empty capacitor) are simulated once,
after which each realization is a table lookup plus Gaussian sampling noise.
Random streams are keyed by ``(seed, grid point, chunk)`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .circuit import CircuitParams
from .detection import (
    build_sequence_table,
    compute_output_ranges,
    compute_steady_states,
    detect_blocks,
    threshold_detect,
)
from .errors import OverlapError
from .modem import Constellation, LinkConfig, average_symbol_power, noise_sigma

DETECTORS = ("ML_steady", "ML_bounded", "MLSD")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class BerResult:
    eb_n0_db: float
    detector: str
    modulation: str
    symbol_period: float
    window: int
    bit_errors: int
    bits_simulated: int
    ber: float
    ci95_halfwidth: float

    @property
    def std_error(self) -> float:
        return self.ci95_halfwidth / Z95


@dataclass(frozen=True)
class EhResult:
    symbol_period: float
    block_length: int
    avg_sequence_power: float
    sequences_averaged: int
    std_error: float


def instantaneous_load_power(vc, rl: float):
    if rl <= 0:
        raise ValueError("load resistance must be positive")
    return np.square(vc) / rl


def average_sequence_power(block_samples, rl: float):
    """Mean load power over the end-of-symbol samples of a block (last axis)."""
    return np.mean(instantaneous_load_power(np.asarray(block_samples, dtype=float), rl), axis=-1)


def modulation_name(c: Constellation) -> str:
    return {2: "BASK", 4: "QASK"}.get(c.order, f"{c.order}-ASK")


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def _hamming_table(c: Constellation) -> np.ndarray:
    labels = c.bit_map
    x = labels[:, None] ^ labels[None, :]
    return np.array([[bin(int(v)).count("1") for v in row] for row in x], dtype=np.int64)


def theoretical_curve(c: Constellation, references, eb_n0_grid_db) -> np.ndarray:
    """Bit error probability of midpoint-threshold detection around ``references``.

    Symbols are equiprobable and the received sample is the reference plus
    Gaussian noise calibrated from the constellation's average power. For two
    symbols this is ``Q((r1 - r0) / (2 sigma))``; passing the closest-pair
    range values instead of steady states turns it into an upper bound.
    """
    refs = np.asarray(references, dtype=float)
    if np.any(np.diff(refs) <= 0):
        raise ValueError("references must be strictly increasing")
    grid = np.atleast_1d(np.asarray(eb_n0_grid_db, dtype=float))
    p_av = average_symbol_power(c)
    b = c.bits_per_symbol
    edges = np.concatenate(([-np.inf], 0.5 * (refs[:-1] + refs[1:]), [np.inf]))
    hamming = _hamming_table(c)
    out = np.empty(grid.size)
    for i, ebn0 in enumerate(db_to_linear(grid)):
        sigma = noise_sigma(p_av, ebn0, b)
        # P(decide j | sent k) for every pair
        cdf = ndtr((edges[None, :] - refs[:, None]) / sigma)
        p = np.diff(cdf, axis=1)
        out[i] = np.sum(p * hamming) / (c.order * b)
    return out


def _detector_setup(detector, params, c, ts, k, big_l, table_kwargs, steady_tol):
    if detector == "ML_steady":
        levels = compute_steady_states(params, c, steady_tol,
                                       samples_per_period=table_kwargs.get("samples_per_period", 100),
                                       refine=table_kwargs.get("refine", False)).levels
        thresholds = 0.5 * (levels[:-1] + levels[1:])
        return lambda y: threshold_detect(y, thresholds).symbols
    if detector == "ML_bounded":
        ranges = compute_output_ranges(params, c, ts, big_l, **table_kwargs)
        if ranges.overlap:
            raise OverlapError(
                f"{modulation_name(c)} output ranges overlap at Ts = {ts:.4g} s; "
                "range-based ML is unusable, use MLSD")
        return lambda y: threshold_detect(y, ranges.thresholds).symbols
    if detector == "MLSD":
        cfg = LinkConfig(ts, big_l, k)
        return lambda y: detect_blocks(y, cfg, params, c, **table_kwargs).symbols
    raise ValueError(f"unknown detector {detector!r}; choose from {DETECTORS}")


def ber_curve(params: CircuitParams, c: Constellation, detector: str, symbol_period: float,
              window: int, block_length: int, eb_n0_grid_db, target_bits: int, seed: int, *,
              chunk_blocks: int = 16384, steady_tol: float = 1e-3, **table_kwargs) -> list:
    """Simulated BER at each Eb/N0 grid point.

    Parameters
    ----------
    detector : {"ML_steady", "ML_bounded", "MLSD"}
        Steady-state references, range-derived thresholds, or sequence
        detection over windows of ``window`` symbols.
    target_bits : int
        Bits per grid point, rounded up to whole blocks.
    table_kwargs
        ``samples_per_period``, ``refine`` and ``budget`` for the candidate tables.

    Returns
    -------
    list of BerResult
    """
    if target_bits < 1:
        raise ValueError("target_bits must be positive")
    c.check_circuit(params)
    if block_length % window:
        raise ValueError(f"window {window} must divide block length {block_length}")
    truth = build_sequence_table(params, c, symbol_period, block_length, 0.0, **table_kwargs)
    decide = _detector_setup(detector, params, c, symbol_period, window, block_length,
                             table_kwargs, steady_tol)
    hamming = _hamming_table(c)
    b = c.bits_per_symbol
    bits_per_block = block_length * b
    n_blocks = math.ceil(target_bits / bits_per_block)
    n_cand = truth.outputs.shape[0]
    p_av = average_symbol_power(c)
    results = []
    for i, db in enumerate(np.atleast_1d(np.asarray(eb_n0_grid_db, dtype=float))):
        sigma = noise_sigma(p_av, float(db_to_linear(db)), b)
        errors = 0
        for j, start in enumerate(range(0, n_blocks, chunk_blocks)):
            nb = min(chunk_blocks, n_blocks - start)
            rng = np.random.default_rng([seed, i, j])
            idx = rng.integers(n_cand, size=nb)
            y = truth.outputs[idx] + sigma * rng.standard_normal((nb, block_length))
            decided = np.asarray(decide(y)).reshape(nb, block_length)
            errors += int(hamming[truth.sequences[idx], decided].sum())
        n_bits = n_blocks * bits_per_block
        ber = errors / n_bits
        results.append(BerResult(
            eb_n0_db=float(db), detector=detector, modulation=modulation_name(c),
            symbol_period=float(symbol_period), window=int(window), bit_errors=errors,
            bits_simulated=n_bits, ber=ber,
            ci95_halfwidth=Z95 * math.sqrt(ber * (1.0 - ber) / n_bits)))
    return results


def eh_sweep(params: CircuitParams, c: Constellation, ts_list, block_length: int, num_blocks: int,
             seed: int, **table_kwargs) -> list:
    """Average load power over random equiprobable blocks, one record per symbol period.

    The same symbol blocks are reused for every symbol period, so the
    comparison across periods is paired.
    """
    if num_blocks < 1:
        raise ValueError("num_blocks must be at least 1")
    out = []
    for ts in ts_list:
        truth = build_sequence_table(params, c, ts, block_length, 0.0, **table_kwargs)
        rng = np.random.default_rng(seed)
        idx = rng.integers(truth.outputs.shape[0], size=num_blocks)
        powers = average_sequence_power(truth.outputs[idx], params.load_resistance)
        se = float(np.std(powers, ddof=1) / math.sqrt(num_blocks)) if num_blocks > 1 else 0.0
        out.append(EhResult(float(ts), int(block_length), float(np.mean(powers)), int(num_blocks), se))
    return out
