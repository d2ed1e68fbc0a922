"""Run configuration: flat ``key = value`` text with unit-suffixed keys.

Values are kept in the units named by their keys (so that serialising and
re-loading is exact) and converted to SI once, by the accessor methods of
``RunConfig``.  Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

from .dispersion import FibreSpec
from .phasematch import PumpPulse


class ConfigError(ValueError):
    """Parse or validation error; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: Optional[int] = None, key=None):
        where = str(path) if path is not None else "<config>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.key = key


REQUIRED = object()


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _prob(v):
    return 0.0 <= v <= 1.0


@dataclass(frozen=True)
class _Key:
    kind: type
    default: object = REQUIRED
    check: Optional[Callable] = None
    rule: str = ""
    choices: tuple = ()


SCHEMA = {
    # fibre
    "core_diameter_um": _Key(float, REQUIRED, _positive, "> 0"),
    "cladding_index": _Key(float, REQUIRED, lambda v: v >= 1.0, ">= 1"),
    "fibre_length_m": _Key(float, REQUIRED, _positive, "> 0"),
    "n2_m2_per_w": _Key(float, 2.0e-20, _positive, "> 0"),
    "effective_area_um2": _Key(float, None, _positive, "> 0"),
    "mode_model": _Key(str, "vector", choices=("vector", "scalar", "bulk")),
    # pump
    "pump_wavelength_nm": _Key(float, REQUIRED, _positive, "> 0"),
    "pump_average_power_uw": _Key(float, REQUIRED, _nonneg, ">= 0"),
    "repetition_rate_mhz": _Key(float, REQUIRED, _positive, "> 0"),
    "pulse_duration_ps": _Key(float, REQUIRED, _positive, "> 0"),
    "pump_regime": _Key(str, "pulsed", choices=("pulsed", "cw")),
    "signal_min_wavelength_nm": _Key(float, 500.0, _positive, "> 0"),
    # detection
    "detector_efficiency_s": _Key(float, REQUIRED, _prob, "in [0, 1]"),
    "detector_efficiency_i": _Key(float, REQUIRED, _prob, "in [0, 1]"),
    "dead_time_ns": _Key(float, 50.0, _nonneg, ">= 0"),
    "bin_width_ps": _Key(float, 156.0, _positive, "> 0"),
    "dark_rate_s_hz": _Key(float, 400.0, _nonneg, ">= 0"),
    "dark_rate_i_hz": _Key(float, 400.0, _nonneg, ">= 0"),
    "jitter_ps": _Key(float, 300.0, _nonneg, ">= 0"),
    # analysis
    "multipair": _Key(str, "none", choices=("none", "poisson")),
    "prediction_convention": _Key(str, "exact", choices=("exact", "published")),
    "rate_tolerance": _Key(float, 0.10, _positive, "> 0"),
    "contrast_tolerance": _Key(float, 0.30, _positive, "> 0"),
    "analyze_input": _Key(str, None),
    # simulation (lumped efficiencies include coupling and filter losses)
    "sim_pair_rate_hz": _Key(float, None, _nonneg, ">= 0"),
    "sim_efficiency_s": _Key(float, 0.235, _prob, "in [0, 1]"),
    "sim_efficiency_i": _Key(float, 0.106, _prob, "in [0, 1]"),
    "sim_background_s_hz": _Key(float, 5.0e3, _nonneg, ">= 0"),
    "sim_background_i_hz": _Key(float, 54.0e3, _nonneg, ">= 0"),
    "sim_duration_s": _Key(float, 0.125, _positive, "> 0"),
    "sim_satellites": _Key(int, 2, lambda v: v >= 1, ">= 1"),
    "seed": _Key(int, 0, _nonneg, ">= 0"),
    # narrow-band projection
    "filter_bandwidth_nm": _Key(float, 0.2, _positive, "> 0"),
    "filter_transmission": _Key(float, 0.4, _prob, "in [0, 1]"),
    "projection_power_mw": _Key(float, 6.0, _nonneg, ">= 0"),
    "output_dir": _Key(str, "."),
}

_FILE_KEYS = ("analyze_input",)


def _convert(key, spec, text, path, line):
    if spec.kind is str:
        value = text
    else:
        try:
            value = spec.kind(text)
        except ValueError:
            raise ConfigError(f"{key}: expected {spec.kind.__name__}, got {text!r}",
                              path, line, key) from None
        if spec.kind is float and not math.isfinite(value):
            raise ConfigError(f"{key}: value must be finite", path, line, key)
    if spec.choices and value not in spec.choices:
        raise ConfigError(f"{key}: must be one of {', '.join(spec.choices)}, got {value!r}",
                          path, line, key)
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{key}: must be {spec.rule}, got {value!r}", path, line, key)
    return value


@dataclass(frozen=True)
class RunConfig:
    """Validated settings, in the units their keys name."""

    values: dict
    base_dir: str = field(default=".", compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def replace(self, **changes) -> "RunConfig":
        vals = dict(self.values)
        for key, value in changes.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", key=key)
            if value is not None:
                value = _convert(key, SCHEMA[key], str(value), None, None)
            vals[key] = value
        return RunConfig(vals, self.base_dir)

    def resolve(self, relpath: str) -> str:
        return relpath if os.path.isabs(relpath) else os.path.join(self.base_dir, relpath)

    def fibre(self) -> FibreSpec:
        v = self.values
        area = v["effective_area_um2"]
        return FibreSpec(
            core_diameter=v["core_diameter_um"] * 1e-6,
            cladding_index=v["cladding_index"],
            n2=v["n2_m2_per_w"],
            length=v["fibre_length_m"],
            effective_area_override=None if area is None else area * 1e-12,
            mode_model=v["mode_model"],
        )

    def pump(self) -> PumpPulse:
        v = self.values
        return PumpPulse(
            wavelength=v["pump_wavelength_nm"] * 1e-9,
            average_power=v["pump_average_power_uw"] * 1e-6,
            repetition_rate=v["repetition_rate_mhz"] * 1e6,
            duration_fwhm=v["pulse_duration_ps"] * 1e-12,
            regime=v["pump_regime"],
        )

    @property
    def repetition_rate(self) -> float:
        return self.values["repetition_rate_mhz"] * 1e6

    @property
    def dead_time(self) -> float:
        return self.values["dead_time_ns"] * 1e-9

    @property
    def signal_window(self) -> tuple:
        return (self.values["signal_min_wavelength_nm"] * 1e-9, None)

    def serialize(self) -> str:
        lines = []
        for key in SCHEMA:
            value = self.values.get(key)
            if value is None:
                continue
            lines.append(f"{key} = {value!r}" if not isinstance(value, str) else f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str, path=None, base_dir: str = ".") -> RunConfig:
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        key = key.lower()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", path, lineno, key)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})",
                              path, lineno, key)
        if not value:
            raise ConfigError(f"{key}: empty value", path, lineno, key)
        seen[key] = lineno
        values[key] = _convert(key, SCHEMA[key], value, path, lineno)
    missing = [k for k, s in SCHEMA.items() if s.default is REQUIRED and k not in values]
    if missing:
        raise ConfigError(f"missing mandatory key(s): {', '.join(missing)}", path,
                          key=missing[0])
    for key, spec in SCHEMA.items():
        values.setdefault(key, spec.default)
    cfg = RunConfig(values, base_dir)
    for key in _FILE_KEYS:
        if values[key] is not None and not os.path.isfile(cfg.resolve(values[key])):
            raise ConfigError(f"{key}: file not found: {values[key]}", path, seen.get(key), key)
    return cfg


def load_config(path) -> RunConfig:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config(text, path, os.path.dirname(os.path.abspath(path)))


def default_config() -> RunConfig:
    """The bundled configuration of the reference experiment."""
    text = resources.files("fwmpairs.data").joinpath("paper.cfg").read_text(encoding="utf-8")
    return parse_config(text, "paper.cfg")


__all__ = ["ConfigError", "RunConfig", "SCHEMA", "load_config", "parse_config", "default_config"]
