import numpy as np
import pytest
from scipy import stats

from fwmpairs import coincidence as co
from fwmpairs.coincidence import (
    CountRecord,
    NoExcessCoincidences,
    SaturationError,
    TIAHistogram,
    analyze,
    deadtime_correct,
    fit_background,
    fit_line,
    pair_rate,
    peak_counts,
    pileup_corrected,
    read_records,
    measured_records,
    write_records,
)

R = 80e6


def ideal_record(r, eff_s, eff_i, b_s=2e3, b_i=3e4, acc=50.0):
    return CountRecord(average_power=1e-3, ns_raw=eff_s * r + b_s, ni_raw=eff_i * r + b_i,
                       c_raw=eff_s * eff_i * r + acc, cb=acc, ns_cw=b_s, ni_cw=b_i,
                       acquisition_time=10.0)


def poisson_record(mu, eff_s, eff_i, b_s, b_i):
    """Exact click probabilities of threshold detectors for Poisson pairs."""
    ps = 1 - np.exp(-mu * eff_s - b_s)
    pi = 1 - np.exp(-mu * eff_i - b_i)
    p_none = np.exp(-mu * (eff_s + eff_i - eff_s * eff_i) - b_s - b_i)
    pc = ps + pi - 1 + p_none
    return CountRecord(average_power=1e-3, ns_raw=ps * R, ni_raw=pi * R, c_raw=pc * R,
                       cb=ps * pi * R, ns_cw=(1 - np.exp(-b_s)) * R,
                       ni_cw=(1 - np.exp(-b_i)) * R)


def test_ideal_record_recovers_rate_and_efficiencies():
    res = pair_rate(ideal_record(2e6, 0.25, 0.1))
    assert res.pair_rate == pytest.approx(2e6, rel=1e-12)
    assert res.eff_signal == pytest.approx(0.25)
    assert res.eff_idler == pytest.approx(0.1)
    assert res.pairs_per_pulse == pytest.approx(2e6 / R)
    assert res.contrast == pytest.approx(0.025 * 2e6 / 50.0)


@pytest.mark.parametrize("eff_s, eff_i", [(0.25, 0.1), (0.125, 0.1), (0.25, 0.05), (0.9, 0.01)])
def test_estimate_is_loss_independent(eff_s, eff_i):
    assert pair_rate(ideal_record(1e6, eff_s, eff_i)).pair_rate == pytest.approx(1e6, rel=1e-12)


@pytest.mark.parametrize("mu", [1e-4, 0.05, 0.3])
def test_poisson_inversion_is_exact(mu):
    rec = poisson_record(mu, 0.25, 0.1, 6e-5, 7e-4)
    res = pair_rate(rec, R, multipair="poisson")
    assert res.pairs_per_pulse == pytest.approx(mu, rel=1e-9)
    assert res.eff_signal == pytest.approx(0.25, rel=1e-9)
    assert res.eff_idler == pytest.approx(0.1, rel=1e-9)


def test_poisson_and_plain_estimators_agree_at_low_rate():
    rec = poisson_record(1e-4, 0.25, 0.1, 6e-5, 7e-4)
    a = pair_rate(rec).pair_rate
    b = pair_rate(rec, multipair="poisson").pair_rate
    assert a == pytest.approx(b, rel=2e-3)


def test_multipair_warning_and_bad_option():
    with pytest.warns(UserWarning, match="pairs per pulse"):
        pair_rate(ideal_record(1e7, 0.25, 0.1))
    with pytest.raises(ValueError):
        pair_rate(ideal_record(1e6, 0.25, 0.1), multipair="exact")


def test_no_excess_coincidences():
    rec = CountRecord(2e-4, 1e5, 5e4, 10.0, 10.0, 900.0, 1.1e4)
    with pytest.raises(NoExcessCoincidences):
        pair_rate(rec)


def test_record_rejects_negative_rates():
    with pytest.raises(ValueError):
        CountRecord(1e-3, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0)


def test_stderr_from_counting_statistics():
    rec = ideal_record(1e6, 0.25, 0.1)
    res = pair_rate(rec)
    assert 0 < res.stderr < 0.01 * res.pair_rate
    longer = pair_rate(CountRecord(**{**rec.__dict__, "acquisition_time": 40.0}))
    assert longer.stderr == pytest.approx(res.stderr / 2, rel=1e-12)
    assert pair_rate(CountRecord(**{**rec.__dict__, "acquisition_time": None})).stderr is None


def test_deadtime_correction():
    assert deadtime_correct(1e6, 50e-9) == pytest.approx(1e6 / 0.95)
    np.testing.assert_allclose(deadtime_correct(np.array([0.0, 1e5]), 50e-9), [0.0, 1e5 / 0.995])
    with pytest.raises(SaturationError):
        deadtime_correct(2e7, 50e-9)


def test_line_fit_matches_linregress(rng):
    x = np.linspace(0, 1e-3, 8)
    y = 400 + 5e7 * x + rng.normal(0, 300, x.size)
    fit = fit_line(x, y)
    ref = stats.linregress(x, y)
    assert fit.slope == pytest.approx(ref.slope, rel=1e-10)
    assert fit.intercept == pytest.approx(ref.intercept, rel=1e-10)
    assert fit.slope_err == pytest.approx(ref.stderr, rel=1e-8)
    assert fit.intercept_err == pytest.approx(ref.intercept_stderr, rel=1e-8)
    assert fit(1e-3) == pytest.approx(ref.intercept + ref.slope * 1e-3)


def test_quadratic_control_fit_flags_curvature():
    x = np.linspace(0, 1e-3, 6)
    curved = 400 + 1e6 * x + 5e12 * x**2 + np.array([3, -2, 1, -3, 2, -1])
    straight = 400 + 1e6 * x + np.array([3, -2, 1, -3, 2, -1])
    assert fit_line(x, curved).quadratic_significance > 10
    assert fit_line(x, straight).quadratic_significance < 2
    assert np.isnan(fit_line([0, 1, 2], [1, 2, 3]).quad_coef)
    with pytest.raises(ValueError):
        fit_line([1e-3, 1e-3], [1, 2])


def test_background_fit_applies_per_power():
    recs = measured_records()
    bg = fit_background(recs)
    out = bg.apply(recs[0])
    assert out.ns_cw == pytest.approx(bg.signal(recs[0].average_power))
    assert out.c_raw == recs[0].c_raw


def test_measured_analysis_against_direct_evaluation():
    recs = measured_records()
    with pytest.warns(UserWarning):
        results = analyze(recs)
    assert len(results) == 5
    for rec, res in zip(recs, results):
        direct = (rec.ns_raw - rec.ns_cw) * (rec.ni_raw - rec.ni_cw) / (rec.c_raw - rec.cb)
        assert res.pair_rate == pytest.approx(direct, rel=1e-12)
    assert results[-1].contrast is None
    assert results[-1].as_row()["contrast"] == ""


def test_histogram_peaks_and_pileup():
    period, bw = 12.5e-9, 0.5e-9
    nb = 125
    t0 = -0.5 * nb * bw
    counts = np.zeros(nb, dtype=int)
    centres = t0 + bw * (np.arange(nb) + 0.5)
    for k, n in ((-2, 10), (-1, 12), (0, 100), (1, 11), (2, 9)):
        counts[np.argmin(np.abs(centres - k * period))] = n
    hist = TIAHistogram(bw, t0, counts, 1000, period, 1.0)
    assert peak_counts(hist) == {-2: 10.0, -1: 12.0, 0: 100.0, 1: 11.0, 2: 9.0}
    acc = co.accidentals_from_histogram(hist)
    assert acc.rate == pytest.approx(10.5) and acc.central_rate == 100.0
    corr = pileup_corrected(hist)
    # each bin is divided by the fraction of starts still waiting for a stop
    i0 = np.argmin(np.abs(centres))
    assert corr[i0] == pytest.approx(100 * 1000 / (1000 - 22))
    assert hist.probability.sum() == pytest.approx(142 / 1000)


def test_csv_round_trip(tmp_path):
    recs = measured_records()
    path = tmp_path / "r.csv"
    write_records(path, recs)
    again = read_records(path)
    for a, b in zip(recs, again):
        assert co.record_row(a) == co.record_row(b)


def test_csv_errors_name_lines(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(",".join(co.CSV_COLUMNS) + "\n960,1,1,1,1,1,0\n660,x,1,1,1,1,0\n")
    with pytest.raises(ValueError, match="line 3"):
        read_records(p)
    p.write_text(",".join(co.CSV_COLUMNS) + "\n")
    with pytest.raises(ValueError, match="no data"):
        read_records(p)
    p.write_text("power_uW,ns_raw_hz\n1,2\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_records(p)
