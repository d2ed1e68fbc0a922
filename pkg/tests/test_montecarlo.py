from dataclasses import replace

import numpy as np
import pytest

from fwmpairs import montecarlo as mc
from fwmpairs.coincidence import fit_line, pair_rate, peak_counts
from fwmpairs.montecarlo import ExperimentTruth, simulate_experiment, sweep_power

SHORT = 2e6 / 80e6  # 2e6 pulses


def truth(**kw):
    base = dict(pairs_per_pulse_mean=4e6 / 80e6, duration=SHORT, seed=3)
    base.update(kw)
    return ExperimentTruth(**base)


@pytest.mark.parametrize("kw", [
    {"eff_s": 1.5}, {"eff_i": -0.1}, {"dead_time": -1.0}, {"duration": 1e-5},
    {"satellites": 0}, {"bin_width": 0.0}, {"background_rate_s": 1e9},
])
def test_truth_validation(kw):
    with pytest.raises(ValueError):
        truth(**kw)


def test_deterministic_given_seed():
    a = simulate_experiment(truth())
    b = simulate_experiment(truth())
    c = simulate_experiment(truth(seed=4))
    assert a.record == b.record
    np.testing.assert_array_equal(a.histogram.counts, b.histogram.counts)
    assert a.record != c.record


def test_block_streams_are_reproducible():
    t = truth()
    s1, i1 = mc._block_clicks(t, 0.05, 0, 3, 3 * mc.BLOCK, 1000)
    s2, i2 = mc._block_clicks(t, 0.05, 0, 3, 3 * mc.BLOCK, 1000)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_array_equal(i1, i2)
    s3, _ = mc._block_clicks(t, 0.05, 1, 3, 3 * mc.BLOCK, 1000)
    assert not np.array_equal(s1, s3)


def test_dead_time_enforced():
    t = truth()
    ts, ti = mc._clicks(t, t.pairs_per_pulse_mean, 0)
    for times in (ts, ti):
        assert np.all(np.diff(times) >= t.dead_time)


def test_histogram_invariants_and_peak_spacing():
    res = simulate_experiment(truth(background_rate_s=5e5, background_rate_i=5e5))
    h = res.histogram
    assert h.counts.sum() <= h.starts_total
    assert np.all(h.counts >= 0)
    centres = h.bin_starts + 0.5 * h.bin_width
    peaks = []
    for k in range(-2, 3):
        sel = np.abs(centres - k * h.period) < 0.5 * h.period
        peaks.append(np.average(centres[sel], weights=h.counts[sel]))
    assert np.allclose(np.diff(peaks), 12.5e-9, atol=h.bin_width)


def test_no_pairs_means_flat_peaks():
    res = simulate_experiment(truth(pairs_per_pulse_mean=0.0, duration=4e6 / 80e6,
                                    background_rate_s=2e6, background_rate_i=2e6))
    peaks = peak_counts(res.histogram)
    sats = np.mean([v for k, v in peaks.items() if k != 0])
    assert abs(peaks[0] - sats) < 3 * np.sqrt(sats)


def test_first_stop_never_exceeds_multi_stop():
    res = simulate_experiment(truth(dead_time=0.0))
    raw = peak_counts(res.histogram)
    for k, v in raw.items():
        assert v <= res.coincidences[k]


@pytest.mark.parametrize("rate", [4e6])
def test_round_trip_within_three_sigma(rate):
    t = truth(pairs_per_pulse_mean=rate / 80e6, duration=1e7 / 80e6, seed=11)
    res = pair_rate(simulate_experiment(t).record)
    assert abs(res.pair_rate - rate) < 3 * res.stderr


def test_contrast_falls_with_pairs_per_pulse():
    t = truth(duration=4e6 / 80e6, seed=5, pairs_per_pulse_mean=0.1,
              background_rate_s=5e3, background_rate_i=5.4e4)
    recs = sweep_power(t, [0.2e-3, 0.5e-3, 0.96e-3], reference_power=0.96e-3)
    with pytest.warns(UserWarning):
        contrast = [pair_rate(r).contrast for r in recs]
    assert contrast[0] > contrast[1] > contrast[2]


def test_sweep_power_scaling_laws():
    powers = np.array([0.2, 0.35, 0.5, 0.65, 0.8, 0.96]) * 1e-3
    t = truth(duration=4e6 / 80e6, seed=8, pairs_per_pulse_mean=0.05,
              background_rate_s=5e4, background_rate_i=5e5)
    recs = sweep_power(t, powers, reference_power=0.96e-3)
    assert [r.average_power for r in recs] == list(powers)
    cw_i = [r.ni_cw for r in recs]
    assert fit_line(powers, cw_i).quadratic_significance < 3
    net_s = np.array([r.ns_raw - r.ns_cw for r in recs])
    # net singles follow a pure quadratic through the origin
    coef = np.sum(net_s * powers**2) / np.sum(powers**4)
    resid = net_s - coef * powers**2
    sigma = np.sqrt(np.array([r.ns_raw + r.ns_cw for r in recs]) / t.duration)
    assert np.all(np.abs(resid) < 3 * sigma + 0.02 * net_s)
    with pytest.raises(ValueError):
        sweep_power(t, [0.0], reference_power=1e-3)


def test_doubling_power_quadruples_excess_coincidences():
    t = truth(duration=4e6 / 80e6, seed=9, pairs_per_pulse_mean=0.02)
    lo, hi = sweep_power(t, [0.25e-3, 0.5e-3], reference_power=0.5e-3)
    ex_lo, ex_hi = lo.c_raw - lo.cb, hi.c_raw - hi.cb
    err = 4 * np.sqrt(lo.c_raw / t.duration) + np.sqrt(hi.c_raw / t.duration)
    assert abs(ex_hi - 4 * ex_lo) < 3 * err


def test_histogram_rows_schema():
    rows = mc.histogram_rows(simulate_experiment(truth()).histogram)
    assert list(rows[0]) == ["bin_start_ps", "probability"]
    assert len(rows) == truth().histogram_bins
