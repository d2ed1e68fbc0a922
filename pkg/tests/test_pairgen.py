import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from fwmpairs.dispersion import C_LIGHT, EPS0, FibreSpec
from fwmpairs.pairgen import (
    PREFACTOR,
    DegenerateGeometryError,
    PulseSpectrum,
    bandwidths,
    chi3_from_n2,
    mean_pairs_closed_form,
    mean_pairs_numeric,
    multi_pair_projection,
    omega_to_nm_width,
    sigma_from_duration,
    spectral_amplitude_sq,
    sweep,
    walk_off_length,
)
from fwmpairs.phasematch import PhaseMatchSolution, PumpPulse


def test_chi3_round_trips_through_n2_definition():
    chi3 = chi3_from_n2(2e-20, 1.45)
    assert 3 * chi3 / (4 * EPS0 * C_LIGHT * 1.45**2) == pytest.approx(2e-20, rel=1e-14)
    assert chi3 == pytest.approx(1.4887e-22, rel=1e-4)


def test_pulse_width_conventions():
    tau = 2e-12
    sigma = sigma_from_duration(tau)
    # temporal intensity exp(-t^2/sigma^2) is at half maximum at tau/2
    assert np.exp(-(tau / 2) ** 2 / sigma**2) == pytest.approx(0.5, rel=1e-12)
    spec = PulseSpectrum.from_pump(PumpPulse(duration_fwhm=tau), 1.45)
    # spectral amplitude exp(-w^2 sigma^2/2) is at half maximum at delta_omega_p/2
    assert np.exp(-(spec.delta_omega_p / 2) ** 2 * sigma**2 / 2) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        PulseSpectrum.from_pump(PumpPulse(regime="cw"), 1.45)


def test_spectral_amplitude_reproduces_peak_power():
    # numerically transform E_p0 exp(-w^2 sigma^2 / 2) back to t = 0
    sigma, n, peak = 0.6e-12, 1.45, 6.0
    e0 = np.sqrt(spectral_amplitude_sq(peak, sigma, n))
    a0, _ = integrate.quad(lambda w: e0 * np.exp(-w * w * sigma * sigma / 2), -40 / sigma,
                           40 / sigma, epsabs=0, epsrel=1e-12)
    assert 0.5 * EPS0 * n * C_LIGHT * a0**2 == pytest.approx(peak, rel=1e-9)


def test_closed_form_matches_quadrature(fibre, pump, solution):
    exact = mean_pairs_closed_form(fibre, pump, solution).mean_pairs_per_pulse
    numeric = mean_pairs_numeric(fibre, pump, solution)
    assert numeric == pytest.approx(exact, rel=1e-3)


def test_published_prefactor_is_twice_exact(fibre, pump, solution):
    a = mean_pairs_closed_form(fibre, pump, solution).mean_pairs_per_pulse
    b = mean_pairs_closed_form(fibre, pump, solution, convention="published").mean_pairs_per_pulse
    assert b / a == pytest.approx(2.0, rel=1e-14)
    assert PREFACTOR["published"] / PREFACTOR["exact"] == 2.0
    with pytest.raises(ValueError):
        mean_pairs_closed_form(fibre, pump, solution, convention="other")


def test_quadratic_power_and_linear_length_laws(fibre, pump, solution):
    base = mean_pairs_closed_form(fibre, pump, solution).mean_pairs_per_pulse
    double_p = mean_pairs_closed_form(fibre, pump.with_power(2 * pump.average_power),
                                      solution).mean_pairs_per_pulse
    double_l = mean_pairs_closed_form(fibre, pump, solution, length=0.4).mean_pairs_per_pulse
    assert double_p / base == pytest.approx(4.0, rel=1e-9)
    assert double_l / base == pytest.approx(2.0, rel=1e-9)


def test_quadrature_grows_linearly_with_length(fibre, pump, solution):
    a = mean_pairs_numeric(fibre, pump, solution, length=0.1)
    b = mean_pairs_numeric(fibre, pump, solution, length=0.2)
    assert b / a == pytest.approx(2.0, rel=1e-3)


def test_pairs_scale_as_inverse_area_squared(fibre, pump, solution):
    area = fibre.effective_area
    a = mean_pairs_closed_form(replace(fibre, effective_area_override=area), pump, solution)
    b = mean_pairs_closed_form(replace(fibre, effective_area_override=2 * area), pump, solution)
    assert a.mean_pairs_per_pulse / b.mean_pairs_per_pulse == pytest.approx(4.0, rel=1e-12)


def test_reference_prediction_frozen(fibre, pump, solution):
    # vector HE11 model at 960 uW, 0.2 m
    p = mean_pairs_closed_form(fibre, pump, solution)
    assert p.pair_rate == pytest.approx(1.009e4, rel=2e-3)
    assert p.signal_bandwidth_nm == pytest.approx(4.37, abs=0.01)
    assert p.idler_bandwidth_nm == pytest.approx(15.84, abs=0.02)
    assert p.walk_off_length == pytest.approx(0.0599, abs=2e-4)
    d = p.to_dict()
    assert all(type(v) is float for v in d.values())


def test_degenerate_geometry_raises(fibre, pump):
    lam = pump.wavelength
    sol = PhaseMatchSolution(lam, lam, lam, 0.0, 0.0)
    with pytest.raises(DegenerateGeometryError):
        mean_pairs_numeric(fibre, pump, sol)
    with pytest.raises(DegenerateGeometryError):
        mean_pairs_closed_form(fibre, pump, sol)


def test_walk_off_infinite_without_group_delay(pump):
    lam = pump.wavelength
    sol = PhaseMatchSolution(lam, lam, lam, 0.0, 0.0)
    assert walk_off_length(FibreSpec(mode_model="bulk"), pump, sol) == np.inf


def test_walk_off_linear_in_duration(fibre, pump, solution):
    a = walk_off_length(fibre, pump, solution)
    b = walk_off_length(fibre, replace(pump, duration_fwhm=2 * pump.duration_fwhm), solution)
    assert b / a == pytest.approx(2.0, rel=1e-12)


def test_bandwidth_constant_beyond_walk_off_and_wider_below(fibre, pump, solution):
    l_wo = walk_off_length(fibre, pump, solution)
    ref = bandwidths(fibre, pump, solution, length=0.15)
    for length in (0.2, 0.5, 1.0):
        assert bandwidths(fibre, pump, solution, length=length) == pytest.approx(ref, rel=1e-12)
    short = bandwidths(fibre, pump, solution, length=0.5 * l_wo)
    assert short[0] > ref[0] and short[1] > ref[1]


def test_long_pulse_bandwidth_tends_to_sinc_term(fibre, solution):
    long_pump = PumpPulse(duration_fwhm=2e-9, average_power=0.96e-3)
    d_s, d_i = bandwidths(fibre, long_pump, solution, length=0.2)
    short_pump = PumpPulse(duration_fwhm=2e-12, average_power=0.96e-3)
    # the sinc term is common to both channels; with a narrow pump it dominates
    assert d_s == pytest.approx(d_i, rel=2e-2)
    assert d_s < bandwidths(fibre, short_pump, solution, length=0.2)[0]


def test_nm_width_conversion():
    lam = 800e-9
    dw = 1e12
    assert omega_to_nm_width(dw, lam) == pytest.approx(lam**2 * dw / (2 * np.pi * C_LIGHT) * 1e9)


def test_projection_identity_and_scaling(fibre, pump, solution):
    p = mean_pairs_closed_form(fibre, pump, solution)
    proj = multi_pair_projection(p, p.signal_bandwidth_nm, 1.0, (1.0, 1.0), pump.average_power)
    assert proj.filtered_pair_rate == pytest.approx(p.pair_rate, rel=1e-12)
    assert proj.four_photon_rate == pytest.approx(p.repetition_rate * p.mean_pairs_per_pulse**2)
    half = multi_pair_projection(p, p.signal_bandwidth_nm / 2, 0.5, (0.5, 0.2),
                                 2 * pump.average_power)
    assert half.filtered_pair_rate / p.pair_rate == pytest.approx(4 * 0.5 * 0.25 * 0.1)
    with pytest.warns(UserWarning):
        clipped = multi_pair_projection(p, 100.0, 1.0, (1.0, 1.0), pump.average_power)
    assert clipped.filter_clipped
    with pytest.raises(ValueError):
        multi_pair_projection(p, 0.2, 1.5, (1.0, 1.0), pump.average_power)


def test_sweep_grid(fibre, pump, solution):
    rows = sweep(fibre, pump, powers=[0.5e-3, 1e-3], lengths=[0.1, 0.2], solution=solution)
    assert len(rows) == 4
    assert rows[1].pair_rate / rows[0].pair_rate == pytest.approx(4.0)
    assert rows[2].pair_rate / rows[0].pair_rate == pytest.approx(2.0)
