"""scikit-learn style wrappers around the functional core.

These adapt the library to array-in/array-out pipelines; all the physics
lives in the other modules.  Units are SI throughout (powers in W,
wavelengths in m, rates in Hz) except where a column name says otherwise.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import coincidence
from .dispersion import FibreSpec
from .pairgen import mean_pairs_closed_form
from .phasematch import PhaseMatchError, PumpPulse, phase_matching_curve, solve_phase_matching


class _FibrePumpParams:
    def _fibre(self):
        return FibreSpec(
            core_diameter=self.core_diameter, cladding_index=self.cladding_index,
            n2=self.n2, length=self.length, mode_model=self.mode_model,
            effective_area_override=self.effective_area,
        )

    def _pump(self):
        return PumpPulse(
            wavelength=self.pump_wavelength, average_power=self.average_power,
            repetition_rate=self.repetition_rate, duration_fwhm=self.duration_fwhm,
        )


class BackgroundModel(RegressorMixin, BaseEstimator):
    """Per-channel linear CW background, ``B(P) = a + b P``.

    ``fit(X, y)``: X is (n, 1) pump power in W, y is (n, 2) CW count rates
    (signal, idler) in Hz.  ``predict`` returns (n, 2) rates.
    """

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=2)
        y = check_array(y, ensure_min_samples=2)
        if X.shape[1] != 1 or y.shape[1] != 2 or len(X) != len(y):
            raise ValueError("expected X of shape (n, 1) and y of shape (n, 2)")
        p = X[:, 0]
        self.signal_fit_ = coincidence.fit_line(p, y[:, 0])
        self.idler_fit_ = coincidence.fit_line(p, y[:, 1])
        self.coef_ = np.array([self.signal_fit_.slope, self.idler_fit_.slope])
        self.intercept_ = np.array([self.signal_fit_.intercept, self.idler_fit_.intercept])
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self.intercept_ + X[:, :1] * self.coef_

    def score(self, X, y, sample_weight=None):
        from sklearn.metrics import r2_score

        return r2_score(y, self.predict(X), sample_weight=sample_weight,
                        multioutput="uniform_average")


class CoincidenceAnalyzer(TransformerMixin, BaseEstimator):
    """Pair rate and lumped efficiencies from count-rate rows.

    Input columns follow ``coincidence.CSV_COLUMNS`` (power in uW, rates in
    Hz); output columns follow ``coincidence.RESULT_COLUMNS``.  With
    ``fit_background=True`` the CW columns seen in ``fit`` define linear
    background lines used in ``transform``.  Rows at zero power come out
    as NaN.
    """

    def __init__(self, repetition_rate=coincidence.DEFAULT_REPETITION_RATE,
                 multipair="none", fit_background=False):
        self.repetition_rate = repetition_rate
        self.multipair = multipair
        self.fit_background = fit_background

    @staticmethod
    def _records(X):
        X = check_array(X)
        if X.shape[1] != len(coincidence.CSV_COLUMNS):
            raise ValueError(f"expected {len(coincidence.CSV_COLUMNS)} columns: "
                             f"{', '.join(coincidence.CSV_COLUMNS)}")
        return [coincidence.CountRecord(average_power=row[0] * 1e-6, ns_raw=row[1], ns_cw=row[2],
                                        ni_raw=row[3], ni_cw=row[4], c_raw=row[5], cb=row[6])
                for row in X]

    def fit(self, X, y=None):
        recs = self._records(X)
        self.background_ = coincidence.fit_background(recs) if self.fit_background else None
        self.n_features_in_ = len(coincidence.CSV_COLUMNS)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        out = np.full((len(X), len(coincidence.RESULT_COLUMNS)), np.nan)
        for j, rec in enumerate(self._records(X)):
            if rec.average_power == 0:
                continue
            if self.background_ is not None:
                rec = self.background_.apply(rec)
            res = coincidence.pair_rate(rec, self.repetition_rate, self.multipair)
            row = res.as_row()
            out[j] = [np.nan if row[c] == "" else row[c] for c in coincidence.RESULT_COLUMNS]
        return out


class PhaseMatchingCurve(_FibrePumpParams, TransformerMixin, BaseEstimator):
    """Pump wavelengths (n, 1) in m -> phase-matched (signal, idler) in m.

    Pump wavelengths without a solution map to NaN.
    """

    def __init__(self, core_diameter=2e-6, cladding_index=1.05, n2=2e-20, length=0.2,
                 mode_model="vector", effective_area=None, pump_wavelength=708.4e-9,
                 average_power=0.96e-3, repetition_rate=80e6, duration_fwhm=2e-12):
        self.core_diameter = core_diameter
        self.cladding_index = cladding_index
        self.n2 = n2
        self.length = length
        self.mode_model = mode_model
        self.effective_area = effective_area
        self.pump_wavelength = pump_wavelength
        self.average_power = average_power
        self.repetition_rate = repetition_rate
        self.duration_fwhm = duration_fwhm

    def fit(self, X=None, y=None):
        self.fibre_ = self._fibre()
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "fibre_")
        X = check_array(X)
        sols = phase_matching_curve(self.fibre_, X[:, 0], self._pump())
        return np.array([[np.nan, np.nan] if s is None else [s.lambda_s, s.lambda_i]
                         for s in sols])


class PairSourceModel(_FibrePumpParams, RegressorMixin, BaseEstimator):
    """Closed-form pair rate versus (average power in W, fibre length in m).

    ``fit`` solves phase matching at the nominal pump; ``predict`` returns
    the pair rate in pairs per second for each row of X, shape (n, 2).
    """

    def __init__(self, core_diameter=2e-6, cladding_index=1.05, n2=2e-20, length=0.2,
                 mode_model="vector", effective_area=None, pump_wavelength=708.4e-9,
                 average_power=0.96e-3, repetition_rate=80e6, duration_fwhm=2e-12,
                 convention="exact"):
        self.core_diameter = core_diameter
        self.cladding_index = cladding_index
        self.n2 = n2
        self.length = length
        self.mode_model = mode_model
        self.effective_area = effective_area
        self.pump_wavelength = pump_wavelength
        self.average_power = average_power
        self.repetition_rate = repetition_rate
        self.duration_fwhm = duration_fwhm
        self.convention = convention

    def fit(self, X=None, y=None):
        fibre, pump = self._fibre(), self._pump()
        try:
            self.solution_ = solve_phase_matching(fibre, pump)
        except PhaseMatchError as exc:
            raise ValueError(str(exc)) from exc
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError("expected X columns (average_power_W, length_m)")
        fibre, pump = self._fibre(), self._pump()
        return np.array([
            mean_pairs_closed_form(fibre, pump.with_power(p), self.solution_, length=length,
                                   convention=self.convention).pair_rate
            for p, length in X
        ])


__all__ = ["BackgroundModel", "CoincidenceAnalyzer", "PhaseMatchingCurve", "PairSourceModel"]
