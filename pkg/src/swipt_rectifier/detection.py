"""Symbol and sequence detection on end-of-symbol rectifier outputs."""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc

from .circuit import CircuitParams, DiodeState, Drive
from .errors import BudgetExceededError, LengthMismatchError
from .modem import Constellation, LinkConfig, indices_to_bits
from .transient import propagate, steady_state_output

DEFAULT_TABLE_BUDGET = 65536
VOLTAGE_QUANTUM = 1e-6


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True)
class SteadyStateSet:
    levels: np.ndarray
    settle_times: Optional[np.ndarray] = None


@dataclass(frozen=True)
class OutputRanges:
    """Extreme end-of-symbol outputs per symbol over all enumerated histories."""

    r_min: np.ndarray
    r_max: np.ndarray
    overlap: bool
    thresholds: Optional[np.ndarray]

    @property
    def representatives(self) -> np.ndarray:
        """Closest-pair references for range-based ML.

        For two symbols these are ``(r_0^max, r_1^min)``. Each nearest-neighbour
        decision then lands on the same midpoint threshold as the ranges.
        """
        m = self.r_min.size
        if m == 2:
            return np.array([self.r_max[0], self.r_min[1]])
        reps = 0.5 * (self.r_min + self.r_max)
        reps[0], reps[-1] = self.r_max[0], self.r_min[-1]
        return reps


@dataclass(frozen=True)
class SequenceOutputTable:
    """Noiseless outputs of every ``M**K`` candidate symbol sequence.

    Rows are in lexicographic order of ``sequences``. ``final_voltage`` and
    ``final_state`` describe the circuit at the end of each candidate, which
    lets a following window continue from a decided sequence.
    """

    sequences: np.ndarray
    outputs: np.ndarray
    final_voltage: np.ndarray
    final_state: np.ndarray
    initial_voltage: float
    start_time: float

    @property
    def window(self) -> int:
        return int(self.sequences.shape[1])

    @property
    def order(self) -> int:
        return int(round(self.sequences.shape[0] ** (1.0 / self.window)))


@dataclass(frozen=True)
class DetectionResult:
    symbols: np.ndarray
    bits: Optional[np.ndarray] = None


def compute_steady_states(params: CircuitParams, c: Constellation, tol: float = 1e-3, *,
                          samples_per_period: int = 100, refine: bool = False,
                          settle_time: bool = False) -> SteadyStateSet:
    results = [steady_state_output(params, a, tol, samples_per_period=samples_per_period,
                                   refine=refine, settle_time=settle_time)
               for a in c.amplitudes]
    levels = np.array([r[0] for r in results])
    if np.any(np.diff(levels) <= 0):
        raise ValueError("steady-state levels are not strictly increasing")
    settle = np.array([r[1] for r in results]) if settle_time else None
    return SteadyStateSet(levels, settle)


_table_cache: dict = {}
_cache_lock = threading.Lock()
_key_locks: dict = {}


def clear_table_cache():
    with _cache_lock:
        _table_cache.clear()
        _key_locks.clear()


def table_cache_size() -> int:
    return len(_table_cache)


def _enumerate_table(params, amplitudes, ts, k, v0, state0, start_time, spp, refine):
    m = len(amplitudes)
    ends = start_time + np.cumsum(np.full(k, ts))
    starts = np.concatenate(([start_time], ends[:-1]))
    volts = np.array([v0])
    states = np.array([int(state0)])
    history = np.zeros((1, 0))
    for level in range(k):
        n_prefix = volts.size
        new_v = np.empty(n_prefix * m)
        new_s = np.empty(n_prefix * m, dtype=np.int64)
        drive_dur = ends[level] - starts[level]
        for q in range(n_prefix):
            for sym in range(m):
                raw = propagate(params, Drive.constant(amplitudes[sym], drive_dur),
                                samples_per_period=spp, initial_voltage=volts[q],
                                initial_state=DiodeState(states[q]), start_time=starts[level],
                                refine=refine, store=False)
                new_v[q * m + sym] = raw["final_voltage"]
                new_s[q * m + sym] = int(raw["final_state"])
        history = np.repeat(history, m, axis=0)
        history = np.column_stack([history, new_v])
        volts, states = new_v, new_s
    sequences = np.array(list(itertools.product(range(m), repeat=k)), dtype=np.int64).reshape(-1, k)
    return SequenceOutputTable(sequences, history, volts, states.astype(np.int8), v0, start_time)


def build_sequence_table(params: CircuitParams, c: Constellation, symbol_period: float, window: int,
                         initial_voltage: float = 0.0, *, initial_state: DiodeState = DiodeState.OFF,
                         start_time: float = 0.0, samples_per_period: float = 100,
                         refine: bool = False, budget: int = DEFAULT_TABLE_BUDGET,
                         cache: bool = True) -> SequenceOutputTable:
    """Simulate every length-``window`` symbol sequence from a common start.

    Shared prefixes are simulated once. ``initial_voltage`` is quantized to
    1 uV, and tables are memoized on all inputs; concurrent requests for the
    same key wait for the first build.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    size = c.order ** window
    if size > budget:
        raise BudgetExceededError(f"{c.order}**{window} = {size} candidates exceeds budget {budget}")
    c.check_circuit(params)
    v0 = round(float(initial_voltage) / VOLTAGE_QUANTUM) * VOLTAGE_QUANTUM
    key = (params, tuple(c.amplitudes.tolist()), float(symbol_period), int(window), v0,
           int(initial_state), float(start_time), float(samples_per_period), bool(refine))
    args = (params, c.amplitudes, float(symbol_period), int(window), v0, initial_state,
            float(start_time), samples_per_period, refine)
    if not cache:
        return _enumerate_table(*args)
    with _cache_lock:
        table = _table_cache.get(key)
        if table is not None:
            return table
        lock = _key_locks.setdefault(key, threading.Lock())
    with lock:
        with _cache_lock:
            table = _table_cache.get(key)
        if table is None:
            table = _enumerate_table(*args)
            with _cache_lock:
                _table_cache[key] = table
    return table


def compute_output_ranges(params: CircuitParams, c: Constellation, symbol_period: float,
                          block_length: int, **table_kwargs) -> OutputRanges:
    """Min/max end-of-symbol output of each symbol over all ``M**L`` blocks from empty.

    Midpoint thresholds ``(r_k^max + r_{k+1}^min) / 2`` are returned only when
    adjacent ranges are disjoint; otherwise ``overlap`` is set.
    """
    table = build_sequence_table(params, c, symbol_period, block_length, 0.0, **table_kwargs)
    m = c.order
    r_min = np.array([table.outputs[table.sequences == k].min() for k in range(m)])
    r_max = np.array([table.outputs[table.sequences == k].max() for k in range(m)])
    overlap = bool(np.any(r_max[:-1] >= r_min[1:]))
    thresholds = None if overlap else 0.5 * (r_max[:-1] + r_min[1:])
    return OutputRanges(r_min, r_max, overlap, thresholds)


def _bits(symbols, c):
    return None if c is None else indices_to_bits(symbols, c)


def threshold_detect(y, thresholds, c: Optional[Constellation] = None) -> DetectionResult:
    """Symbol index = number of thresholds strictly below the sample."""
    symbols = np.searchsorted(np.asarray(thresholds, dtype=float), np.asarray(y, dtype=float),
                              side="left")
    return DetectionResult(symbols, _bits(symbols, c))


def ml_detect(y, references, c: Optional[Constellation] = None) -> DetectionResult:
    """Nearest-reference decision per sample; exact ties go to the lower index.

    ``references`` must be strictly increasing, so nearest-reference regions
    are the intervals between adjacent midpoints.
    """
    references = np.asarray(references, dtype=float)
    if np.any(np.diff(references) <= 0):
        raise ValueError("references must be strictly increasing")
    return threshold_detect(y, 0.5 * (references[:-1] + references[1:]), c)


def theoretical_pe_bask(a0: float, a1: float, sigma: float):
    """Error probability of binary threshold detection between levels ``a0`` and ``a1``."""
    return q_function((np.asarray(a1) - np.asarray(a0)) / (2.0 * np.asarray(sigma, dtype=float)))


def mlsd_detect(y, table: SequenceOutputTable, c: Optional[Constellation] = None) -> DetectionResult:
    """Exhaustive minimum-distance sequence decision.

    ``y`` is one window ``(K,)`` or a batch ``(B, K)``. The first minimum in
    table order wins, i.e. the lexicographically smallest sequence on ties.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    if y2.shape[1] != table.window:
        raise LengthMismatchError(f"expected windows of {table.window} samples, got {y2.shape[1]}")
    cand = table.outputs
    chunk = max(1, (1 << 22) // cand.size)
    best = np.empty(y2.shape[0], dtype=np.int64)
    for s in range(0, y2.shape[0], chunk):
        diff = y2[s:s + chunk, None, :] - cand[None, :, :]
        best[s:s + chunk] = np.argmin(np.sum(diff * diff, axis=2), axis=1)
    symbols = table.sequences[best]
    if single:
        symbols = symbols[0]
    return DetectionResult(symbols, _bits(symbols, c))


def detect_blocks(y, cfg: LinkConfig, params: CircuitParams, c: Constellation,
                  **table_kwargs) -> DetectionResult:
    """MLSD over blocks of ``L`` samples using consecutive windows of ``K``.

    The first window starts from an empty capacitor. Each later window is
    matched against candidates simulated from the noiseless end state of the
    sequence decided in the previous window.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    big_l, k = cfg.block_length, cfg.sequence_window
    if y.shape[1] != big_l:
        raise LengthMismatchError(f"expected blocks of {big_l} samples, got {y.shape[1]}")
    if big_l % k:
        raise ValueError(f"window {k} must divide block length {big_l}")
    ts = cfg.symbol_period
    n_blocks = y.shape[0]
    decided = np.empty((n_blocks, big_l), dtype=np.int64)
    start_v = np.zeros(n_blocks)
    start_s = np.zeros(n_blocks, dtype=np.int64)
    for w in range(big_l // k):
        cols = slice(w * k, (w + 1) * k)
        start_time = float(np.sum(np.full(w * k, ts))) if w else 0.0
        keys = np.round(start_v / VOLTAGE_QUANTUM).astype(np.int64)
        pairs = np.column_stack([keys, start_s])
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        for u, (qv, st) in enumerate(uniq):
            rows = np.flatnonzero(inverse == u)
            table = build_sequence_table(params, c, ts, k, qv * VOLTAGE_QUANTUM,
                                         initial_state=DiodeState(int(st)), start_time=start_time,
                                         **table_kwargs)
            res = mlsd_detect(y[rows, cols], table)
            decided[rows, cols] = res.symbols
            idx = _row_index(res.symbols, c.order)
            start_v[rows] = table.final_voltage[idx]
            start_s[rows] = table.final_state[idx]
    return DetectionResult(decided, indices_to_bits(decided, c).reshape(n_blocks, -1))


def detect_block(y, cfg: LinkConfig, params: CircuitParams, c: Constellation,
                 **table_kwargs) -> DetectionResult:
    res = detect_blocks(np.asarray(y, dtype=float)[None, :], cfg, params, c, **table_kwargs)
    return DetectionResult(res.symbols[0], res.bits[0])


def _row_index(symbols, order):
    """Lexicographic row of each symbol sequence in a table."""
    symbols = np.atleast_2d(symbols)
    weights = order ** np.arange(symbols.shape[1] - 1, -1, -1)
    return symbols @ weights
