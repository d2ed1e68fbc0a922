"""Command-line entry point: ``fwmpairs <subcommand> [options]``.

Every subcommand reads the run configuration (``--config``, default the
bundled reference file), writes its artifacts into ``--out`` and exits with
0 on success, 2 on invalid input and 3 on numerical failure.  On failure a
JSON object ``{"error": ..., "message": ..., "exit_code": ...}`` is printed
to stderr and no output file is created or modified.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import coincidence, dispersion, montecarlo, pairgen, phasematch
from .config import ConfigError, default_config, load_config

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_NUMERICAL = (
    phasematch.PhaseMatchError,
    dispersion.ModeSolverError,
    pairgen.QuadratureError,
    coincidence.SaturationError,
    ArithmeticError,
    RuntimeError,
)


class _Outputs:
    """Artifacts staged in memory and written only when the command succeeds."""

    def __init__(self, directory: str, fmt: str):
        self.directory = directory
        self.fmt = fmt
        self.files = {}

    def table(self, stem: str, rows: list, columns=None) -> None:
        if not rows:
            raise ValueError(f"{stem}: nothing to write")
        columns = list(columns or rows[0].keys())
        if self.fmt == "json":
            self.json(stem, [{c: _clean(r[c]) for c in columns} for r in rows])
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
        self.files[stem + ".csv"] = buf.getvalue()

    def json(self, stem: str, obj) -> None:
        self.files[stem + ".json"] = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"

    def commit(self) -> list:
        os.makedirs(self.directory, exist_ok=True)
        staged = []
        try:
            for name, text in self.files.items():
                fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=self.directory)
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                staged.append((tmp, os.path.join(self.directory, name)))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, final in staged:
            os.replace(tmp, final)
        return [final for _, final in staged]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj == "":
        return None
    return obj


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from None


# -- subcommands -------------------------------------------------------------

def cmd_dispersion(cfg, args, out):
    fibre = cfg.fibre()
    lams = np.linspace(args.lambda_min_nm, args.lambda_max_nm, args.points) * 1e-9
    out.table("dispersion", dispersion.dispersion_table(fibre, lams))
    zdw = dispersion.zero_dispersion_wavelength(fibre)
    out.json("dispersion_summary", {"zero_dispersion_wavelength_nm": zdw * 1e9,
                                    "mode_model": fibre.mode_model})


def cmd_phasematch(cfg, args, out):
    fibre, pump = cfg.fibre(), cfg.pump()
    if args.pump_min_nm is None:
        sols = [phasematch.solve_phase_matching(fibre, pump, signal_window=cfg.signal_window)]
        lams = [pump.wavelength]
    else:
        lams = np.linspace(args.pump_min_nm, args.pump_max_nm, args.points) * 1e-9
        sols = phasematch.phase_matching_curve(fibre, lams, pump, signal_window=cfg.signal_window)
    rows = []
    for lam, sol in zip(lams, sols):
        if sol is None:
            rows.append({"lambda_p_nm": float(f"{lam * 1e9:.12g}"), "lambda_s_nm": None, "lambda_i_nm": None,
                         "delta_k_residual": None, "gamma_P": None})
        else:
            rows.append(sol.as_row())
    out.table("phasematch", rows)


def cmd_predict(cfg, args, out):
    fibre, pump = cfg.fibre(), cfg.pump()
    sol = phasematch.solve_phase_matching(fibre, pump, signal_window=cfg.signal_window)
    conv = cfg["prediction_convention"]
    pred = pairgen.mean_pairs_closed_form(fibre, pump, sol, convention=conv)
    out.json("prediction", pred.to_dict())
    if args.powers_uw or args.lengths_m:
        powers = [p * 1e-6 for p in _floats(args.powers_uw)] if args.powers_uw else None
        lengths = _floats(args.lengths_m) if args.lengths_m else None
        rows = [p.to_dict() for p in pairgen.sweep(fibre, pump, powers, lengths, sol)]
        out.table("predict_sweep", rows)


def _records_input(cfg, args):
    path = args.input or cfg["analyze_input"]
    if path is None:
        return coincidence.measured_records()
    return coincidence.read_records(cfg.resolve(path) if args.input is None else path)


def cmd_analyze(cfg, args, out):
    records = _records_input(cfg, args)
    background = None
    if args.fit_background:
        background = coincidence.fit_background(records)
    results = coincidence.analyze(records, cfg.repetition_rate, background, cfg["multipair"])
    if not results:
        raise ValueError("no records with non-zero pump power")
    out.table("analysis", [r.as_row() for r in results], coincidence.RESULT_COLUMNS)


def _truth(cfg, seed, pair_rate):
    v = cfg.values
    return montecarlo.ExperimentTruth(
        pairs_per_pulse_mean=pair_rate / cfg.repetition_rate,
        background_rate_s=v["sim_background_s_hz"],
        background_rate_i=v["sim_background_i_hz"],
        eff_s=v["sim_efficiency_s"],
        eff_i=v["sim_efficiency_i"],
        dark_rate_s=v["dark_rate_s_hz"],
        dark_rate_i=v["dark_rate_i_hz"],
        dead_time=cfg.dead_time,
        jitter=v["jitter_ps"] * 1e-12,
        repetition_rate=cfg.repetition_rate,
        bin_width=v["bin_width_ps"] * 1e-12,
        satellites=v["sim_satellites"],
        duration=v["sim_duration_s"],
        seed=seed,
        average_power=cfg.pump().average_power,
    )


def cmd_simulate(cfg, args, out):
    rate = cfg["sim_pair_rate_hz"]
    source = "config"
    if rate is None:
        fibre, pump = cfg.fibre(), cfg.pump()
        sol = phasematch.solve_phase_matching(fibre, pump, signal_window=cfg.signal_window)
        rate = pairgen.mean_pairs_closed_form(
            fibre, pump, sol, convention=cfg["prediction_convention"]).pair_rate
        source = "model"
    truth = _truth(cfg, cfg["seed"], rate)
    if args.powers_uw:
        powers = [p * 1e-6 for p in _floats(args.powers_uw)]
        records = montecarlo.sweep_power(truth, powers, truth.average_power)
        out.table("records", [coincidence.record_row(r) for r in records],
                  coincidence.CSV_COLUMNS)
        return
    res = montecarlo.simulate_experiment(truth)
    out.table("histogram", montecarlo.histogram_rows(res.histogram))
    out.table("records", [coincidence.record_row(res.record)], coincidence.CSV_COLUMNS)
    out.json("truth", {"pair_rate_hz": rate, "pair_rate_source": source,
                       "pairs_per_pulse": truth.pairs_per_pulse_mean,
                       "n_pulses": truth.n_pulses, "seed": truth.seed,
                       "rng": montecarlo.RNG_ALGORITHM})


COMMANDS = {
    "dispersion": cmd_dispersion,
    "phasematch": cmd_phasematch,
    "predict": cmd_predict,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (default: bundled reference)")
    common.add_argument("--out", help="output directory (default: output_dir from config)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular outputs")

    parser = argparse.ArgumentParser(prog="fwmpairs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", parents=[common], help="mode index, group index and GVD")
    p.add_argument("--lambda-min-nm", type=float, default=500.0)
    p.add_argument("--lambda-max-nm", type=float, default=1100.0)
    p.add_argument("--points", type=int, default=121)

    p = sub.add_parser("phasematch", parents=[common], help="phase-matched signal and idler")
    p.add_argument("--pump-min-nm", type=float)
    p.add_argument("--pump-max-nm", type=float)
    p.add_argument("--points", type=int, default=21)

    p = sub.add_parser("predict", parents=[common], help="pair number, bandwidths, walk-off")
    p.add_argument("--powers-uw", help="comma-separated sweep powers")
    p.add_argument("--lengths-m", help="comma-separated sweep lengths")

    p = sub.add_parser("analyze", parents=[common], help="pair rate from count rates")
    p.add_argument("--input", help="count-rate CSV (default: bundled measurements)")
    p.add_argument("--fit-background", action="store_true",
                   help="replace CW rates by per-channel linear fits")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo coincidence experiment")
    p.add_argument("--powers-uw", help="comma-separated powers for a power sweep")
    return parser


def _validate_args(args):
    if getattr(args, "points", 2) < 2:
        raise ValueError("--points must be >= 2")
    if args.command == "phasematch" and (args.pump_min_nm is None) != (args.pump_max_nm is None):
        raise ValueError("--pump-min-nm and --pump-max-nm go together")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ValueError("--seed must be an unsigned 64-bit integer")


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        _validate_args(args)
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        out_dir = args.out or cfg.resolve(cfg["output_dir"])
        out = _Outputs(out_dir, args.format)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            COMMANDS[args.command](cfg, args, out)
        written = out.commit()
    except (ConfigError, coincidence.NoExcessCoincidences, ValueError, OSError) as exc:
        return _fail(exc, EXIT_VALIDATION)
    except _NUMERICAL as exc:
        return _fail(exc, EXIT_NUMERICAL)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
