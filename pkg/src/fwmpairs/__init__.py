"""Photon pairs from four-wave mixing in microstructured fibre.

Modules
-------
dispersion   silica index, step-index mode solvers, group index and GVD
phasematch   phase-matched signal/idler wavelengths with self-phase modulation
pairgen      pair number, bandwidths and walk-off for a pulsed pump
coincidence  pair rate, efficiencies and backgrounds from count rates
montecarlo   event-level simulation of the coincidence experiment
config, cli  run configuration and the ``fwmpairs`` command
estimators   scikit-learn style wrappers
"""
from .coincidence import (
    AnalysisResult,
    CountRecord,
    analyze,
    fit_background,
    pair_rate,
    read_records,
    measured_records,
)
from .config import RunConfig, default_config, load_config
from .dispersion import (
    FUSED_SILICA,
    FibreSpec,
    SellmeierModel,
    dispersion_sample,
    effective_index,
    he11_effective_index,
    lp01_effective_index,
    zero_dispersion_wavelength,
)
from .montecarlo import ExperimentTruth, simulate_experiment, sweep_power
from .pairgen import PairPrediction, mean_pairs_closed_form, mean_pairs_numeric, predict
from .phasematch import PhaseMatchSolution, PumpPulse, solve_phase_matching

__version__ = "0.1.0"
