"""Loss-independent extraction of the pair rate from singles and coincidences.

With background-subtracted singles ``N_s - B_s``, ``N_i - B_i`` and excess
coincidences ``C - C_b`` the pair rate is

    r = (N_s - B_s)(N_i - B_i) / (C - C_b)

and the lumped (transmission x quantum) efficiencies follow as
``(C - C_b)/(N_i - B_i)`` and ``(C - C_b)/(N_s - B_s)``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields
from importlib import resources
from typing import Iterable, Optional

import numpy as np

DEFAULT_REPETITION_RATE = 80e6
DEFAULT_DEAD_TIME = 50e-9
MULTIPAIR_WARN = 0.1

CSV_COLUMNS = ("power_uW", "ns_raw_hz", "ns_cw_hz", "ni_raw_hz", "ni_cw_hz", "c_raw_hz", "cb_hz")
RESULT_COLUMNS = ("power_uW", "r_hz", "n_per_pulse", "contrast", "eff_s", "eff_i")


class NoExcessCoincidences(ValueError):
    pass


class SaturationError(ValueError):
    pass


@dataclass(frozen=True)
class CountRecord:
    """Counting rates in Hz at one average pump power (W)."""

    average_power: float
    ns_raw: float
    ni_raw: float
    c_raw: float
    cb: float
    ns_cw: float
    ni_cw: float
    dark_s: float = 400.0
    dark_i: float = 400.0
    acquisition_time: Optional[float] = None
    satellite_peaks: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("acquisition_time",) and v is None:
                continue
            if v < 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")


@dataclass(frozen=True)
class AnalysisResult:
    average_power: float
    pair_rate: float
    pairs_per_pulse: float
    eff_signal: float
    eff_idler: float
    contrast: Optional[float]
    stderr: Optional[float] = None

    def as_row(self) -> dict:
        return {
            "power_uW": float(f"{self.average_power * 1e6:.12g}"),
            "r_hz": self.pair_rate,
            "n_per_pulse": self.pairs_per_pulse,
            "contrast": "" if self.contrast is None else self.contrast,
            "eff_s": self.eff_signal,
            "eff_i": self.eff_idler,
        }


def deadtime_correct(rate, dead_time: float = DEFAULT_DEAD_TIME):
    """Non-paralyzable dead-time correction ``rate / (1 - rate * dead_time)``."""
    rate = np.asarray(rate, dtype=float)
    x = rate * dead_time
    if np.any(x >= 1.0):
        raise SaturationError(f"detector saturated: rate*dead_time = {np.max(x):.3f} >= 1")
    out = rate / (1.0 - x)
    return float(out) if out.ndim == 0 else out


def _excess(record):
    excess_c = record.c_raw - record.cb
    if not excess_c > 0:
        raise NoExcessCoincidences(
            f"no excess coincidences at {record.average_power * 1e6:.0f} uW "
            f"(C_raw={record.c_raw}, C_b={record.cb})"
        )
    net_s = record.ns_raw - record.ns_cw
    net_i = record.ni_raw - record.ni_cw
    if not (net_s > 0 and net_i > 0):
        raise ValueError("background-subtracted singles must be positive")
    return net_s, net_i, excess_c


def _poisson_pairs_per_pulse(record, rep):
    # threshold detectors and Poisson pair statistics, inverted exactly
    ps, pi, pc = record.ns_raw / rep, record.ni_raw / rep, record.c_raw / rep
    bs, bi = record.ns_cw / rep, record.ni_cw / rep
    joint = np.log((1.0 - ps - pi + pc) / ((1.0 - ps) * (1.0 - pi)))
    a = np.log((1.0 - bs) / (1.0 - ps))
    b = np.log((1.0 - bi) / (1.0 - pi))
    return a * b / joint, joint / b, joint / a


def pair_rate(record: CountRecord, repetition_rate: float = DEFAULT_REPETITION_RATE,
              multipair: str = "none") -> AnalysisResult:
    """Pair rate, lumped efficiencies and contrast for one record.

    ``multipair='none'`` drops the multi-pair terms (valid well below 0.1
    pairs per pulse; a warning is emitted above that).  ``'poisson'``
    inverts the click probabilities of threshold detectors for Poisson
    pair statistics and reduces to the same expression at low rates.
    """
    net_s, net_i, excess_c = _excess(record)
    if multipair == "none":
        r = net_s * net_i / excess_c
        eff_s, eff_i = excess_c / net_i, excess_c / net_s
    elif multipair == "poisson":
        mu, eff_s, eff_i = _poisson_pairs_per_pulse(record, repetition_rate)
        r = mu * repetition_rate
    else:
        raise ValueError("multipair must be 'none' or 'poisson'")
    n = r / repetition_rate
    if multipair == "none" and n > MULTIPAIR_WARN:
        warnings.warn(f"{n:.3f} pairs per pulse: multi-pair terms are no longer negligible",
                      stacklevel=2)
    contrast = excess_c / record.cb if record.cb > 0 else None
    return AnalysisResult(
        average_power=record.average_power,
        pair_rate=float(r),
        pairs_per_pulse=float(n),
        eff_signal=float(eff_s),
        eff_idler=float(eff_i),
        contrast=contrast,
        stderr=pair_rate_stderr(record),
    )


def pair_rate_stderr(record: CountRecord) -> Optional[float]:
    """Delta-method standard error of ``r`` from Poisson counting noise.

    Needs ``acquisition_time``.  Cross-correlations between singles and
    coincidences are ignored, which overstates the error slightly.
    """
    t = record.acquisition_time
    if t is None:
        return None
    net_s, net_i, excess_c = _excess(record)
    var_c = (record.c_raw + record.cb / max(record.satellite_peaks, 1)) / t
    rel2 = ((record.ns_raw + record.ns_cw) / t / net_s**2
            + (record.ni_raw + record.ni_cw) / t / net_i**2
            + var_c / excess_c**2)
    return float(net_s * net_i / excess_c * np.sqrt(rel2))


def analyze(records: Iterable[CountRecord], repetition_rate: float = DEFAULT_REPETITION_RATE,
            background=None, multipair: str = "none") -> list:
    """Run ``pair_rate`` on every record.

    If ``background`` (a fitted ``BackgroundFit``) is given, the CW rates of
    each record are replaced by the fitted lines at that power.  Zero-power
    rows are dark-count references and are skipped.
    """
    out = []
    for rec in records:
        if rec.average_power == 0:
            continue
        if background is not None:
            rec = background.apply(rec)
        out.append(pair_rate(rec, repetition_rate, multipair))
    return out


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    residual_norm: float
    quad_coef: float
    quad_coef_err: float

    def __call__(self, power):
        return self.intercept + self.slope * np.asarray(power, dtype=float)

    @property
    def quadratic_significance(self) -> float:
        """|quadratic coefficient| in units of its standard error."""
        if self.quad_coef_err == 0:
            return float("inf") if self.quad_coef else 0.0
        return abs(self.quad_coef) / self.quad_coef_err


def _lstsq(x, y, degree):
    A = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - (degree + 1)
    s2 = resid @ resid / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    return coef, np.sqrt(np.diag(cov)), float(np.linalg.norm(resid))


def fit_line(power, rate) -> LineFit:
    """Least-squares line plus a quadratic control fit for the linearity check."""
    x = np.asarray(power, dtype=float)
    y = np.asarray(rate, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two CW points at distinct powers")
    coef, err, rnorm = _lstsq(x, y, 1)
    if x.size >= 4:
        qcoef, qerr, _ = _lstsq(x, y, 2)
        q, qe = float(qcoef[2]), float(qerr[2])
    else:
        q, qe = float("nan"), float("nan")
    return LineFit(float(coef[1]), float(coef[0]), float(err[1]), float(err[0]), rnorm, q, qe)


@dataclass(frozen=True)
class BackgroundFit:
    """Per-channel CW background lines, B(P) = intercept + slope * P (Hz, W)."""

    signal: LineFit
    idler: LineFit

    def apply(self, record: CountRecord) -> CountRecord:
        from dataclasses import replace

        p = record.average_power
        return replace(record, ns_cw=float(self.signal(p)), ni_cw=float(self.idler(p)))


def fit_background(cw_records: Iterable[CountRecord]) -> BackgroundFit:
    """Linear background model per channel from CW-regime rates.

    The fitted lines give total background (dark counts included); their
    intercepts should sit near the dark-count rate.
    """
    recs = list(cw_records)
    if len(recs) < 2:
        raise ValueError("fit_background needs at least two CW records")
    p = [r.average_power for r in recs]
    return BackgroundFit(fit_line(p, [r.ns_cw for r in recs]),
                         fit_line(p, [r.ni_cw for r in recs]))


@dataclass(frozen=True)
class TIAHistogram:
    """Start-stop delay histogram; delay 0 is the same-pulse coincidence."""

    bin_width: float
    t0: float
    counts: np.ndarray
    starts_total: int
    period: float
    acquisition_time: float

    @property
    def window(self) -> float:
        return self.bin_width * len(self.counts)

    @property
    def bin_starts(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(len(self.counts))

    @property
    def probability(self) -> np.ndarray:
        return self.counts / max(self.starts_total, 1)


def pileup_corrected(hist: TIAHistogram) -> np.ndarray:
    """Undo first-stop pile-up: counts / (starts not yet stopped)."""
    counts = np.asarray(hist.counts, dtype=float)
    remaining = hist.starts_total - np.concatenate(([0.0], np.cumsum(counts)[:-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(remaining > 0, counts * hist.starts_total / remaining, 0.0)
    return out


def peak_counts(hist: TIAHistogram, correct_pileup: bool = False) -> dict:
    """Integrated counts of every peak fully inside the window, keyed by pulse offset."""
    counts = pileup_corrected(hist) if correct_pileup else np.asarray(hist.counts, float)
    centres = hist.bin_starts + 0.5 * hist.bin_width
    lo_t, hi_t = hist.t0, hist.t0 + hist.window
    k_min = int(np.ceil((lo_t + 0.5 * hist.period) / hist.period - 1e-9))
    k_max = int(np.floor((hi_t - 0.5 * hist.period) / hist.period + 1e-9))
    out = {}
    for k in range(k_min, k_max + 1):
        sel = np.abs(centres - k * hist.period) < 0.5 * hist.period
        out[k] = float(counts[sel].sum())
    return out


@dataclass(frozen=True)
class Accidentals:
    rate: float
    satellites: int
    low_statistics: bool
    central_rate: float


def accidentals_from_histogram(hist: TIAHistogram, correct_pileup: bool = False) -> Accidentals:
    """Accidental-coincidence rate C_b as the mean of the satellite peaks (Hz)."""
    peaks = peak_counts(hist, correct_pileup)
    central = peaks.get(0, 0.0) / hist.acquisition_time
    sats = [v for k, v in peaks.items() if k != 0]
    if len(sats) < 2 or sum(sats) == 0:
        return Accidentals(0.0, len(sats), True, central)
    return Accidentals(float(np.mean(sats)) / hist.acquisition_time, len(sats), False, central)


def read_records(path, dark: float = 400.0) -> list:
    """Load the ``analyze`` CSV (rates in Hz, power in uW)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            out.append(CountRecord(
                average_power=float(row["power_uW"]) * 1e-6,
                ns_raw=float(row["ns_raw_hz"]), ni_raw=float(row["ni_raw_hz"]),
                c_raw=float(row["c_raw_hz"]), cb=float(row["cb_hz"]),
                ns_cw=float(row["ns_cw_hz"]), ni_cw=float(row["ni_cw_hz"]),
                dark_s=dark, dark_i=dark,
            ))
        except ValueError as exc:
            raise ValueError(f"{path}, line {i}: {exc}") from None
    return out


def record_row(r: CountRecord) -> dict:
    """One record in the ``analyze`` input schema."""
    return dict(zip(CSV_COLUMNS, (float(f"{r.average_power * 1e6:.12g}"), float(r.ns_raw), float(r.ns_cw),
                                  float(r.ni_raw), float(r.ni_cw), float(r.c_raw), float(r.cb))))


def write_records(path, records: Iterable[CountRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: repr(v) for k, v in record_row(r).items()})


def measured_records() -> list:
    """The bundled coincidence measurements on 0.2 m of fibre."""
    path = resources.files("fwmpairs.data").joinpath("measured_rates.csv")
    with resources.as_file(path) as p:
        return read_records(p)
