"""Fibre dispersion: silica Sellmeier index, step-index mode solvers, derivatives.

The microstructured fibre is replaced by a step-index fibre whose core is
fused silica and whose cladding carries an effective (air-filling averaged)
index.  Two mode solvers are provided:

* ``lp01_effective_index`` -- scalar weakly-guiding LP01 equation
  ``u J1(u)/J0(u) = w K1(w)/K0(w)``.
* ``he11_effective_index`` -- exact vector HE11 equation of a step-index
  fibre, which stays accurate at the large index contrast of a holey
  cladding.

``FibreSpec.mode_model`` picks which one feeds ``propagation_constant`` and
everything built on it.  Spectral quantities are keyed on angular frequency.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0, j1, k0e, k1e

C_LIGHT = 299_792_458.0
EPS0 = 8.8541878128e-12

_U_HE11_MAX = 2.404825557695773  # first zero of J0


class DispersionError(ValueError):
    """Raised when a wavelength is outside a model's validity range."""


class ModeSolverError(RuntimeError):
    """Raised when the mode equation has no bracketed fundamental root."""


@dataclass(frozen=True)
class SellmeierModel:
    """Three-term Sellmeier fit, wavelengths in micrometres.

    Defaults are the Malitson (1965) fused-silica constants::

        B = 0.6961663, 0.4079426, 0.8974794
        C = 0.0684043, 0.1162414, 9.896161   (um)
    """

    strengths: tuple = (0.6961663, 0.4079426, 0.8974794)
    resonances_um: tuple = (0.0684043, 0.1162414, 9.896161)
    valid_range_um: tuple = (0.21, 3.71)

    def index(self, wavelength):
        return sellmeier_index(self, wavelength)


FUSED_SILICA = SellmeierModel()


def sellmeier_index(model: SellmeierModel, wavelength):
    """Bulk index at ``wavelength`` (metres); scalar or array."""
    lam_um = np.asarray(wavelength, dtype=float) * 1e6
    lo, hi = model.valid_range_um
    if np.any(lam_um <= lo) or np.any(lam_um >= hi):
        raise DispersionError(
            f"wavelength outside Sellmeier validity ({lo}-{hi} um): {lam_um}"
        )
    l2 = lam_um**2
    n2 = 1.0
    for b, c in zip(model.strengths, model.resonances_um):
        n2 = n2 + b * l2 / (l2 - c * c)
    n = np.sqrt(n2)
    return float(n) if n.ndim == 0 else n


@dataclass(frozen=True)
class FibreSpec:
    """Step-index surrogate of the microstructured fibre (SI units)."""

    core_diameter: float = 2.0e-6
    cladding_index: float = 1.05
    n2: float = 2.0e-20
    length: float = 0.2
    effective_area_override: Optional[float] = None
    mode_model: str = "vector"
    material: SellmeierModel = field(default=FUSED_SILICA)

    def __post_init__(self):
        if not self.core_diameter > 0:
            raise ValueError("core_diameter must be > 0")
        if not self.length > 0:
            raise ValueError("length must be > 0")
        if not self.cladding_index >= 1.0:
            raise ValueError("cladding_index must be >= 1")
        if self.mode_model not in ("vector", "scalar", "bulk"):
            raise ValueError(f"unknown mode_model {self.mode_model!r}")
        if self.effective_area_override is not None and not self.effective_area_override > 0:
            raise ValueError("effective_area_override must be > 0")

    @property
    def radius(self) -> float:
        return 0.5 * self.core_diameter

    @property
    def effective_area(self) -> float:
        if self.effective_area_override is not None:
            return self.effective_area_override
        return np.pi * self.radius**2

    def core_index(self, wavelength):
        return sellmeier_index(self.material, wavelength)


def _guidance_bounds(fibre: FibreSpec, wavelength: float):
    n_core = fibre.core_index(wavelength)
    if not fibre.cladding_index < n_core:
        raise ModeSolverError(
            f"cladding index {fibre.cladding_index} >= core index {n_core:.6f} "
            f"at {wavelength * 1e9:.2f} nm"
        )
    k0a = 2.0 * np.pi / wavelength * fibre.radius
    return n_core, k0a


def _uw(n_eff, n_core, n_clad, k0a):
    u = k0a * np.sqrt(np.maximum(n_core**2 - n_eff**2, 0.0))
    w = k0a * np.sqrt(np.maximum(n_eff**2 - n_clad**2, 0.0))
    return u, w


def _bracket_highest_root(f, lo, hi, panels, label):
    grid = np.linspace(lo, hi, panels + 1)
    vals = f(grid)
    flips = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    if flips.size == 0:
        raise ModeSolverError(
            f"{label}: no sign change of the mode equation in n_eff "
            f"({lo:.9f}, {hi:.9f}); endpoint values {vals[0]:.3e}, {vals[-1]:.3e}"
        )
    i = flips[-1]
    return brentq(f, grid[i], grid[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps,
                  maxiter=200)


def lp01_effective_index(fibre: FibreSpec, wavelength: float, panels: int = 512) -> float:
    """Scalar LP01 effective index (weakly-guiding approximation).

    The characteristic equation is used in its pole-free product form
    ``u J1(u) K0(w) - w K1(w) J0(u) = 0``; the fundamental mode is the
    root closest to the core index.
    """
    n_core, k0a = _guidance_bounds(fibre, wavelength)
    n_clad = fibre.cladding_index

    def f(n_eff):
        u, w = _uw(n_eff, n_core, n_clad, k0a)
        # exponentially scaled K's: common factor e^-w drops out
        return u * j1(u) * k0e(w) - w * k1e(w) * j0(u)

    return _bracket_highest_root(f, n_clad + 1e-9, n_core - 1e-9, panels, "LP01")


def he11_effective_index(fibre: FibreSpec, wavelength: float, panels: int = 512) -> float:
    """Vector HE11 effective index of a step-index fibre.

    Solves

        (J + K)(J + (n_clad/n_core)^2 K) = (n_eff/n_core)^2 (1/u^2 + 1/w^2)^2

    with ``J = J1'(u)/(u J1(u))`` and ``K = K1'(w)/(w K1(w))``.  For HE11
    ``u`` lies below the first zero of J0, which bounds the scan.
    """
    n_core, k0a = _guidance_bounds(fibre, wavelength)
    n_clad = fibre.cladding_index
    v = k0a * np.sqrt(n_core**2 - n_clad**2)
    u_max = min(_U_HE11_MAX, v) * (1 - 1e-12)
    lo = max(np.sqrt(n_core**2 - (u_max / k0a) ** 2), n_clad + 1e-9)
    ratio = (n_clad / n_core) ** 2

    def f(n_eff):
        u, w = _uw(n_eff, n_core, n_clad, k0a)
        jr = j0(u) / (u * j1(u)) - 1.0 / u**2
        kr = -k0e(w) / (w * k1e(w)) - 1.0 / w**2
        rhs = (n_eff / n_core) ** 2 * (1.0 / u**2 + 1.0 / w**2) ** 2
        return (jr + kr) * (jr + ratio * kr) - rhs

    return _bracket_highest_root(f, lo, n_core - 1e-9, panels, "HE11")


def effective_index(fibre: FibreSpec, wavelength: float) -> float:
    """Mode index according to ``fibre.mode_model`` ('bulk' = no waveguide)."""
    if fibre.mode_model == "vector":
        return he11_effective_index(fibre, wavelength)
    if fibre.mode_model == "scalar":
        return lp01_effective_index(fibre, wavelength)
    return fibre.core_index(wavelength)


def omega_to_wavelength(omega):
    return 2.0 * np.pi * C_LIGHT / np.asarray(omega, dtype=float)


wavelength_to_omega = omega_to_wavelength


def propagation_constant(fibre: FibreSpec, omega: float) -> float:
    """k(omega) = n_eff omega / c, in rad/m."""
    return effective_index(fibre, float(omega_to_wavelength(omega))) * omega / C_LIGHT


@dataclass(frozen=True)
class DispersionSample:
    omega: float
    n_eff: float
    k: float
    group_index: float
    group_velocity: float
    gvd: float
    group_index_error: float = 0.0

    @property
    def wavelength(self) -> float:
        return float(omega_to_wavelength(self.omega))


DEFAULT_STEP = 1e-3


def _derivatives(fibre, omega, step):
    h = step * omega
    km2 = propagation_constant(fibre, omega - 2 * h)
    km1 = propagation_constant(fibre, omega - h)
    k00 = propagation_constant(fibre, omega)
    kp1 = propagation_constant(fibre, omega + h)
    kp2 = propagation_constant(fibre, omega + 2 * h)
    d1_h = (kp1 - km1) / (2 * h)
    d1_2h = (kp2 - km2) / (4 * h)
    d2 = (kp1 - 2 * k00 + km1) / h**2
    return k00, d1_h, d1_2h, d2


def dispersion_sample(fibre: FibreSpec, omega: float, step: float = DEFAULT_STEP) -> DispersionSample:
    """Mode index, group index, group velocity and GVD at ``omega``.

    Derivatives are central differences with ``h = step * omega``.  The
    Richardson difference between steps h and 2h estimates the truncation
    error of the group index (reported in ``group_index_error``); the
    returned group index is the Richardson-extrapolated value.
    """
    omega = float(omega)
    k, d1_h, d1_2h, d2 = _derivatives(fibre, omega, step)
    d1 = d1_h + (d1_h - d1_2h) / 3.0
    ng = C_LIGHT * d1
    return DispersionSample(
        omega=omega,
        n_eff=k * C_LIGHT / omega,
        k=k,
        group_index=ng,
        group_velocity=C_LIGHT / ng,
        gvd=d2,
        group_index_error=abs(C_LIGHT * (d1_h - d1_2h) / 3.0),
    )


def group_index(fibre: FibreSpec, omega: float, step: float = DEFAULT_STEP) -> float:
    return dispersion_sample(fibre, omega, step).group_index


def gvd(fibre: FibreSpec, omega: float, step: float = DEFAULT_STEP) -> float:
    h = step * omega
    return (propagation_constant(fibre, omega + h) - 2 * propagation_constant(fibre, omega)
            + propagation_constant(fibre, omega - h)) / h**2


def zero_dispersion_wavelength(
    fibre: FibreSpec,
    window: tuple = (500e-9, 1100e-9),
    samples: int = 61,
    tol: float = 1e-13,
) -> float:
    """Shortest wavelength in ``window`` where d^2k/domega^2 changes sign.

    Scans ``samples`` wavelengths, brackets the first sign change and
    bisects it to ``tol`` metres.
    """
    lams = np.linspace(window[0], window[1], samples)
    vals = np.array([gvd(fibre, float(wavelength_to_omega(l))) for l in lams])
    flips = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    if flips.size == 0:
        raise DispersionError(
            f"no ZDW in range {window[0] * 1e9:.0f}-{window[1] * 1e9:.0f} nm"
        )
    i = flips[0]
    return brentq(lambda l: gvd(fibre, float(wavelength_to_omega(l))),
                  lams[i], lams[i + 1], xtol=tol)


def dispersion_table(fibre: FibreSpec, wavelengths) -> list:
    """Rows for the ``dispersion`` CSV export."""
    rows = []
    for lam in wavelengths:
        s = dispersion_sample(fibre, float(wavelength_to_omega(lam)))
        rows.append({
            "lambda_nm": float(f"{lam * 1e9:.12g}"),
            "n_eff": s.n_eff,
            "k_rad_per_m": s.k,
            "group_index": s.group_index,
            "vg_m_per_s": s.group_velocity,
            "gvd_s2_per_m": s.gvd,
        })
    return rows
