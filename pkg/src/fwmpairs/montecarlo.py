"""Monte Carlo of the pulsed coincidence experiment.

Per pump pulse: a Poisson number of pairs, independent detection of each
photon, Poisson background photons synchronous with the pump, plus
uniformly distributed dark counts.  Detectors are threshold devices (one
click per pulse at most), click times carry Gaussian jitter, and a
non-paralyzable dead time acts on each channel.  A first-stop time-interval
analyser (start = signal, stop = first idler click) builds the delay
histogram.

Random numbers: numpy ``PCG64`` streams, one per block of ``BLOCK`` pulses,
seeded with ``SeedSequence(seed, spawn_key=(stream, block))``.  The block
size is fixed, so results do not depend on how blocks are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .coincidence import CountRecord, TIAHistogram, accidentals_from_histogram, peak_counts

BLOCK = 1 << 20
RNG_ALGORITHM = "PCG64 via numpy SeedSequence(seed, spawn_key=(stream, block))"

_PULSED_STREAM = 0
_CW_STREAM = 1


@dataclass(frozen=True)
class ExperimentTruth:
    pairs_per_pulse_mean: float
    background_rate_s: float = 5e3
    background_rate_i: float = 54e3
    eff_s: float = 0.235
    eff_i: float = 0.106
    dark_rate_s: float = 400.0
    dark_rate_i: float = 400.0
    dead_time: float = 50e-9
    jitter: float = 300e-12
    repetition_rate: float = 80e6
    bin_width: float = 156e-12
    satellites: int = 2
    duration: float = 0.125
    seed: int = 0
    average_power: float = 0.0

    def __post_init__(self):
        for name in ("eff_s", "eff_i"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        for name in ("pairs_per_pulse_mean", "background_rate_s", "background_rate_i",
                     "dark_rate_s", "dark_rate_i", "dead_time", "jitter"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.repetition_rate > 0 or not self.bin_width > 0:
            raise ValueError("repetition_rate and bin_width must be > 0")
        if self.satellites < 1:
            raise ValueError("need at least one satellite peak per side")
        if self.n_pulses < 10_000:
            raise ValueError(f"duration gives only {self.n_pulses} pulses; need >= 1e4")
        if self.background_rate_s / self.repetition_rate >= 1 or \
                self.background_rate_i / self.repetition_rate >= 1:
            raise ValueError("background exceeds one photon per pulse")

    @property
    def period(self) -> float:
        return 1.0 / self.repetition_rate

    @property
    def n_pulses(self) -> int:
        return int(round(self.duration * self.repetition_rate))

    @property
    def pair_rate(self) -> float:
        return self.pairs_per_pulse_mean * self.repetition_rate

    @property
    def histogram_bins(self) -> int:
        half = (self.satellites + 0.5) * self.period
        return int(np.ceil(2 * half / self.bin_width))


def _rng(seed, stream, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def _block_clicks(truth, mu, stream, block, start, size):
    """Raw (pre-dead-time) click times for one block of pulses."""
    rng = _rng(truth.seed, stream, block)
    T = truth.period
    pairs = rng.poisson(mu, size) if mu > 0 else np.zeros(size, np.int64)
    det_s = rng.binomial(pairs, truth.eff_s)
    det_i = rng.binomial(pairs, truth.eff_i)
    det_s += rng.poisson(truth.background_rate_s * T, size)
    det_i += rng.poisson(truth.background_rate_i * T, size)
    out = []
    for det, dark in ((det_s, truth.dark_rate_s), (det_i, truth.dark_rate_i)):
        idx = np.nonzero(det)[0]
        t = (start + idx) * T + rng.normal(0.0, truth.jitter, idx.size)
        n_dark = rng.poisson(dark * size * T)
        td = (start + rng.uniform(0.0, size, n_dark)) * T
        out.append(np.concatenate((t, td)))
    return out


def _apply_dead_time(times, dead_time):
    times = np.sort(times)
    if dead_time <= 0 or times.size == 0:
        return times
    keep = np.empty(times.size, bool)
    last = -np.inf
    for j, t in enumerate(times.tolist()):
        if t - last >= dead_time:
            keep[j] = True
            last = t
        else:
            keep[j] = False
    return times[keep]


def _clicks(truth, mu, stream):
    n = truth.n_pulses
    s_parts, i_parts = [], []
    for block, start in enumerate(range(0, n, BLOCK)):
        s, i = _block_clicks(truth, mu, stream, block, start, min(BLOCK, n - start))
        s_parts.append(s)
        i_parts.append(i)
    ts = _apply_dead_time(np.concatenate(s_parts), truth.dead_time)
    ti = _apply_dead_time(np.concatenate(i_parts), truth.dead_time)
    return ts, ti


def tia_histogram(ts, ti, truth) -> TIAHistogram:
    """First-stop histogram of idler-minus-signal delays around delay 0."""
    nb = truth.histogram_bins
    t0 = -0.5 * nb * truth.bin_width
    idx = np.searchsorted(ti, ts + t0, side="left")
    valid = idx < ti.size
    delay = np.full(ts.size, np.inf)
    delay[valid] = ti[idx[valid]] - ts[valid]
    b = np.floor((delay[valid] - t0) / truth.bin_width).astype(np.int64)
    b = b[(b >= 0) & (b < nb)]
    counts = np.bincount(b, minlength=nb)
    return TIAHistogram(
        bin_width=truth.bin_width, t0=t0, counts=counts, starts_total=int(ts.size),
        period=truth.period, acquisition_time=truth.n_pulses * truth.period,
    )


def pulse_coincidences(ts, ti, truth) -> dict:
    """Multi-stop coincidence counts per pulse offset k (idler pulse - signal pulse)."""
    T = truth.period
    ks = np.rint(ts / T).astype(np.int64)
    ki = np.rint(ti / T).astype(np.int64)
    ki_sorted = np.sort(ki)
    out = {}
    for k in range(-truth.satellites, truth.satellites + 1):
        lo = np.searchsorted(ki_sorted, ks + k, side="left")
        hi = np.searchsorted(ki_sorted, ks + k, side="right")
        out[k] = int(np.sum(hi - lo))
    return out


@dataclass(frozen=True)
class SimulationResult:
    record: CountRecord
    histogram: TIAHistogram
    coincidences: dict
    singles: tuple


def simulate_experiment(truth: ExperimentTruth, correct_pileup: bool = False) -> SimulationResult:
    """Simulate pulsed and CW runs and reduce them to a ``CountRecord``.

    Central-peak and accidental coincidence rates are read off the TIA
    histogram.  The Coates pile-up correction assumes Poisson stops; with a
    stop-channel dead time comparable to the window it overcorrects, so it
    is off unless asked for.  The CW run uses the same background rates
    with no pairs.
    """
    acq = truth.n_pulses * truth.period
    ts, ti = _clicks(truth, truth.pairs_per_pulse_mean, _PULSED_STREAM)
    hist = tia_histogram(ts, ti, truth)
    acc = accidentals_from_histogram(hist, correct_pileup=correct_pileup)
    cs, ci = _clicks(truth, 0.0, _CW_STREAM)
    record = CountRecord(
        average_power=truth.average_power,
        ns_raw=ts.size / acq, ni_raw=ti.size / acq,
        c_raw=acc.central_rate, cb=acc.rate,
        ns_cw=cs.size / acq, ni_cw=ci.size / acq,
        dark_s=truth.dark_rate_s, dark_i=truth.dark_rate_i,
        acquisition_time=acq, satellite_peaks=max(acc.satellites, 1),
    )
    return SimulationResult(record, hist, pulse_coincidences(ts, ti, truth), (ts.size, ti.size))


def sweep_power(template: ExperimentTruth, powers: Sequence[float],
                reference_power: float) -> list:
    """Records over pump powers: pairs scale as P^2, backgrounds as P.

    ``template`` holds the rates at ``reference_power``.  Each power gets its
    own seed offset so the runs are independent.
    """
    out = []
    for j, p in enumerate(powers):
        if not p > 0:
            raise ValueError("powers must be > 0")
        a = p / reference_power
        t = replace(
            template,
            pairs_per_pulse_mean=template.pairs_per_pulse_mean * a * a,
            background_rate_s=template.background_rate_s * a,
            background_rate_i=template.background_rate_i * a,
            seed=template.seed + 7919 * (j + 1),
            average_power=p,
        )
        out.append(simulate_experiment(t).record)
    return out


def histogram_rows(hist: TIAHistogram) -> list:
    return [{"bin_start_ps": t * 1e12, "probability": p}
            for t, p in zip(hist.bin_starts, hist.probability)]


__all__ = [
    "ExperimentTruth", "SimulationResult", "simulate_experiment", "sweep_power",
    "tia_histogram", "pulse_coincidences", "histogram_rows", "peak_counts", "RNG_ALGORITHM",
]
