"""Degenerate-pump four-wave-mixing phase matching with self-phase modulation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .dispersion import (
    C_LIGHT,
    FibreSpec,
    omega_to_wavelength,
    propagation_constant,
    wavelength_to_omega,
)


class PhaseMatchError(RuntimeError):
    """No phase-matched signal/idler pair in the search window."""


@dataclass(frozen=True)
class PumpPulse:
    """Pump laser settings (SI).

    ``duration_fwhm`` is the intensity FWHM.  Peak power uses the
    rectangular-pulse equivalence ``P_avg / (rate * duration)``.
    """

    wavelength: float = 708.4e-9
    average_power: float = 1.0e-3
    repetition_rate: float = 80e6
    duration_fwhm: float = 2e-12
    regime: str = "pulsed"

    def __post_init__(self):
        if self.average_power < 0:
            raise ValueError("average_power must be >= 0")
        if not self.repetition_rate > 0:
            raise ValueError("repetition_rate must be > 0")
        if self.regime not in ("pulsed", "cw"):
            raise ValueError(f"regime must be 'pulsed' or 'cw', got {self.regime!r}")
        if self.regime == "pulsed" and not self.duration_fwhm > 0:
            raise ValueError("duration_fwhm must be > 0 for a pulsed pump")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")

    @property
    def omega(self) -> float:
        return float(wavelength_to_omega(self.wavelength))

    @property
    def peak_power(self) -> float:
        if self.regime == "cw":
            return self.average_power
        return self.average_power / (self.repetition_rate * self.duration_fwhm)

    def with_power(self, average_power: float) -> "PumpPulse":
        return PumpPulse(self.wavelength, average_power, self.repetition_rate,
                         self.duration_fwhm, self.regime)


@dataclass(frozen=True)
class PhaseMatchSolution:
    lambda_p: float
    lambda_s: float
    lambda_i: float
    delta_k_residual: float
    gamma_P: float

    @property
    def omega_p(self) -> float:
        return float(wavelength_to_omega(self.lambda_p))

    @property
    def omega_s(self) -> float:
        return float(wavelength_to_omega(self.lambda_s))

    @property
    def omega_i(self) -> float:
        return 2.0 * self.omega_p - self.omega_s

    def as_row(self) -> dict:
        return {
            "lambda_p_nm": float(f"{self.lambda_p * 1e9:.12g}"),
            "lambda_s_nm": self.lambda_s * 1e9,
            "lambda_i_nm": self.lambda_i * 1e9,
            "delta_k_residual": self.delta_k_residual,
            "gamma_P": self.gamma_P,
        }


def nonlinear_coefficient(fibre: FibreSpec, lambda_p: float) -> float:
    """gamma = 2 pi n2 / (lambda_p A_eff) in 1/(W m)."""
    if not lambda_p > 0:
        raise ValueError("lambda_p must be > 0")
    return 2.0 * np.pi * fibre.n2 / (lambda_p * fibre.effective_area)


def phase_mismatch(fibre: FibreSpec, omega_p: float, omega_s: float, omega_i: float,
                   peak_power: float) -> float:
    """Delta k = 2 k(w_p) - k(w_s) - k(w_i) - 2 gamma P  (rad/m)."""
    gamma = nonlinear_coefficient(fibre, float(omega_to_wavelength(omega_p)))
    return (2.0 * propagation_constant(fibre, omega_p)
            - propagation_constant(fibre, omega_s)
            - propagation_constant(fibre, omega_i)
            - 2.0 * gamma * peak_power)


def _mismatch_fn(fibre, omega_p, peak_power):
    k_p2 = 2.0 * propagation_constant(fibre, omega_p)
    spm = 2.0 * nonlinear_coefficient(fibre, float(omega_to_wavelength(omega_p))) * peak_power

    def dk(omega_s):
        return (k_p2 - propagation_constant(fibre, omega_s)
                - propagation_constant(fibre, 2.0 * omega_p - omega_s) - spm)

    return dk


def solve_phase_matching(
    fibre: FibreSpec,
    pump: PumpPulse,
    signal_window: tuple = (500e-9, None),
    samples: int = 240,
    tol: float = 1e-3,
    near: Optional[float] = None,
) -> PhaseMatchSolution:
    """Non-degenerate phase-matched signal/idler pair for ``pump``.

    ``Delta k(omega_s)`` is sampled on a grid of signal frequencies between
    just above the pump and ``signal_window[0]`` (shortest signal
    wavelength); sign changes are bracketed and refined with Brent's method
    until ``|Delta k| < tol`` rad/m.  The idler follows from energy
    conservation.  With several roots, ``near`` (a signal wavelength) picks
    the closest one, otherwise the root farthest from degeneracy wins.
    Idler frequencies that fall outside the material model are skipped.
    """
    omega_p = pump.omega
    lam_short = signal_window[0]
    lam_long = signal_window[1] if signal_window[1] is not None else pump.wavelength
    w_hi = float(wavelength_to_omega(lam_short))
    w_lo = max(float(wavelength_to_omega(lam_long)), omega_p) * (1 + 1e-4)
    lo_idler = float(wavelength_to_omega(fibre.material.valid_range_um[1] * 1e-6)) * (1 + 1e-6)
    w_hi = min(w_hi, 2.0 * omega_p - lo_idler)
    if not w_hi > w_lo:
        raise PhaseMatchError("empty signal search window")
    dk = _mismatch_fn(fibre, omega_p, pump.peak_power)
    grid = np.linspace(w_lo, w_hi, samples + 1)
    vals = np.array([dk(w) for w in grid])
    flips = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    if flips.size == 0:
        raise PhaseMatchError(
            f"no phase-matched solution for pump {pump.wavelength * 1e9:.2f} nm "
            f"with signal in {lam_short * 1e9:.0f}-{lam_long * 1e9:.1f} nm"
        )
    roots = []
    for i in flips:
        root = brentq(dk, grid[i], grid[i + 1], xtol=1e-12 * grid[i],
                      rtol=4 * np.finfo(float).eps, maxiter=500)
        roots.append(root)
    if near is not None:
        target = float(wavelength_to_omega(near))
        omega_s = min(roots, key=lambda r: abs(r - target))
    else:
        omega_s = max(roots)
    residual = dk(omega_s)
    if abs(residual) >= tol:
        raise PhaseMatchError(f"root residual {residual:.3e} rad/m exceeds tol {tol}")
    omega_i = 2.0 * omega_p - omega_s
    gamma = nonlinear_coefficient(fibre, pump.wavelength)
    return PhaseMatchSolution(
        lambda_p=pump.wavelength,
        lambda_s=2.0 * np.pi * C_LIGHT / omega_s,
        lambda_i=2.0 * np.pi * C_LIGHT / omega_i,
        delta_k_residual=residual,
        gamma_P=gamma * pump.peak_power,
    )


def phase_matching_curve(
    fibre: FibreSpec,
    pump_wavelengths: Sequence[float],
    pump: PumpPulse,
    **kwargs,
) -> list:
    """Solutions along a pump-wavelength scan; ``None`` where none exists.

    Each sample after the first is seeded with the previous signal
    wavelength so the curve stays on one branch.
    """
    out = []
    prev = None
    for lam in pump_wavelengths:
        p = PumpPulse(float(lam), pump.average_power, pump.repetition_rate,
                      pump.duration_fwhm, pump.regime)
        try:
            sol = solve_phase_matching(fibre, p, near=prev, **kwargs)
        except PhaseMatchError:
            out.append(None)
            continue
        prev = sol.lambda_s
        out.append(sol)
    return out
