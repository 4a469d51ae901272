import math

import numpy as np
import pytest

from swipt_rectifier.detection import (
    build_sequence_table,
    clear_table_cache,
    compute_output_ranges,
    compute_steady_states,
    q_function,
)
from swipt_rectifier.errors import OverlapError
from swipt_rectifier.experiments import (
    average_sequence_power,
    ber_curve,
    eh_sweep,
    instantaneous_load_power,
    theoretical_curve,
)
from swipt_rectifier.modem import average_symbol_power, noise_sigma

from conftest import TS_LONG, TS_MID, TS_SHORT


class TestPower:
    def test_instantaneous(self):
        assert instantaneous_load_power(0.5, 1e3) == pytest.approx(2.5e-4)
        assert instantaneous_load_power(0.0, 1e3) == 0.0

    def test_rejects_bad_load(self):
        with pytest.raises(ValueError):
            instantaneous_load_power(1.0, 0.0)

    def test_block_average(self):
        assert average_sequence_power([0.5, 0.5], 1e3) == pytest.approx(2.5e-4)
        np.testing.assert_allclose(average_sequence_power([[0.0, 1.0], [1.0, 1.0]], 2.0), [0.25, 0.5])


class TestTheoreticalCurve:
    def test_bask_closed_form(self, bask):
        refs = np.array([0.2, 0.5])
        grid = np.array([0.0, 6.0, 10.0])
        sigma = np.array([noise_sigma(average_symbol_power(bask), 10 ** (g / 10), 1) for g in grid])
        expected = q_function(0.15 / sigma)
        np.testing.assert_allclose(theoretical_curve(bask, refs, grid), expected, rtol=1e-12)

    def test_range_curve_is_upper_bound(self, circuit, bask):
        grid = np.arange(0.0, 21.0, 2.0)
        steady = theoretical_curve(bask, compute_steady_states(circuit, bask).levels, grid)
        reps = compute_output_ranges(circuit, bask, TS_SHORT, 6).representatives
        bound = theoretical_curve(bask, reps, grid)
        assert np.all(bound >= steady)
        assert np.all(np.diff(steady) < 0)

    def test_vanishes_at_high_snr(self, bask):
        assert theoretical_curve(bask, [0.17, 0.54], [80.0])[0] < 1e-12

    def test_qask_reasonable(self, qask):
        p = theoretical_curve(qask, [0.1, 0.2, 0.3, 0.4], [0.0, 30.0])
        assert 0 < p[0] < 0.5 and p[1] < 1e-6


class TestBerCurve:
    def test_deterministic(self, circuit, bask):
        a = ber_curve(circuit, bask, "MLSD", TS_SHORT, 3, 6, [4.0, 8.0], 60_000, 7)
        b = ber_curve(circuit, bask, "MLSD", TS_SHORT, 3, 6, [4.0, 8.0], 60_000, 7)
        assert a == b

    def test_cached_tables_match_rebuilt(self, circuit, bask):
        a = ber_curve(circuit, bask, "ML_bounded", TS_MID, 1, 6, [6.0], 60_000, 3)
        clear_table_cache()
        b = ber_curve(circuit, bask, "ML_bounded", TS_MID, 1, 6, [6.0], 60_000, 3)
        assert a == b

    def test_monotone_in_snr(self, circuit, bask):
        res = ber_curve(circuit, bask, "ML_steady", TS_LONG, 1, 6, [0.0, 4.0, 8.0, 12.0], 200_000, 1)
        for lo, hi in zip(res, res[1:]):
            assert hi.ber <= lo.ber + 3 * math.hypot(lo.std_error, hi.std_error)

    def test_bits_rounded_to_blocks(self, circuit, bask):
        res = ber_curve(circuit, bask, "ML_steady", TS_LONG, 1, 6, [10.0], 1000, 1)[0]
        assert res.bits_simulated == 1002
        assert 0 <= res.bit_errors <= res.bits_simulated

    def test_noiseless_is_error_free(self, circuit, bask):
        res = ber_curve(circuit, bask, "MLSD", TS_SHORT, 6, 6, [math.inf], 6000, 1)[0]
        assert res.bit_errors == 0 and res.ci95_halfwidth == 0

    def test_qask_bounded_overlap_raises(self, circuit, qask):
        with pytest.raises(OverlapError, match="overlap"):
            ber_curve(circuit, qask, "ML_bounded", TS_SHORT, 1, 3, [10.0], 100, 1)

    def test_unknown_detector(self, circuit, bask):
        with pytest.raises(ValueError):
            ber_curve(circuit, bask, "ZF", TS_LONG, 1, 6, [10.0], 100, 1)

    def test_window_must_divide(self, circuit, bask):
        with pytest.raises(ValueError):
            ber_curve(circuit, bask, "MLSD", TS_SHORT, 4, 6, [10.0], 100, 1)


class TestEhSweep:
    def test_all_high_symbol_power(self, circuit):
        from swipt_rectifier.modem import Constellation

        c = Constellation.from_amplitudes([1.0, 1.0 + 1e-9])
        a1 = compute_steady_states(circuit, c).levels[0]
        res = eh_sweep(circuit, c, [TS_LONG], 3, 50, 0)[0]
        assert res.avg_sequence_power == pytest.approx(a1 ** 2 / circuit.load_resistance, rel=2e-3)

    def test_shorter_symbols_harvest_more(self, circuit, bask):
        # short symbols leave no time to discharge towards the low level
        res = eh_sweep(circuit, bask, [TS_SHORT, TS_MID, TS_LONG], 6, 2000, 4)
        power = [r.avg_sequence_power for r in res]
        assert power[0] > power[1] > power[2]
        assert all(r.sequences_averaged == 2000 and r.std_error > 0 for r in res)

    def test_more_blocks_consistent(self, circuit, bask):
        a = eh_sweep(circuit, bask, [TS_MID], 6, 2000, 5)[0]
        b = eh_sweep(circuit, bask, [TS_MID], 6, 4000, 6)[0]
        assert abs(a.avg_sequence_power - b.avg_sequence_power) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_table_reuse(self, circuit, bask):
        res = eh_sweep(circuit, bask, [TS_SHORT], 6, 10, 0)[0]
        table = build_sequence_table(circuit, bask, TS_SHORT, 6)
        idx = np.random.default_rng(0).integers(64, size=10)
        expected = np.mean(average_sequence_power(table.outputs[idx], circuit.load_resistance))
        assert res.avg_sequence_power == pytest.approx(expected, rel=1e-15)

    def test_rejects_zero_blocks(self, circuit, bask):
        with pytest.raises(ValueError):
            eh_sweep(circuit, bask, [TS_SHORT], 6, 0, 0)
