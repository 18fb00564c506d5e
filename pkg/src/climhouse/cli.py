"""Command-line entry point: ``climhouse COMMAND [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import shutil
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import EstimationError, calibrate_hpi, estimate_productivity
from .config import (
    ConfigError,
    RunConfig,
    hpi_report,
    load_config,
    productivity_report,
    resolve_models,
    to_document,
)
from .data import DataError, read_hpi_csv, read_productivity_csv, write_hpi_csv, write_productivity_csv
from .data import TimeSeries
from .economy import GridMismatchError, NotHurwitzError, simulate_z
from .harness import annual_slowdown, emit_results, run_sweep
from .valuation import (
    DecisionKind,
    conditional_price_law,
    log_index_paths,
    optimal_renovation_date,
    transition_cost_x,
)

log = logging.getLogger("climhouse")

EXIT_OK = 0
EXIT_USER = 2
EXIT_NUMERIC = 3


class UserError(Exception):
    pass


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    sweep = cfg.sweep
    if args.seed is not None:
        sweep = replace(sweep, seed=args.seed)
    if args.paths is not None:
        if args.paths < 1:
            raise ConfigError("--paths", "must be at least 1")
        sweep = replace(sweep, paths=args.paths)
    out_dir = Path(args.out) if args.out is not None else cfg.output_dir
    return replace(cfg, sweep=sweep, output_dir=out_dir)


def _emit(text: str, args) -> None:
    if not args.quiet:
        print(text)


def format_decision(decision, t_origin: float) -> str:
    """``now``, ``never`` or ``renovate_at <years after t_origin> (year <absolute>)``."""
    if decision.kind is DecisionKind.NOW:
        return "now"
    if decision.kind is DecisionKind.NEVER:
        return "never"
    return f"renovate_at {decision.date - t_origin:.6f} (year {decision.date:.6f})"


# --- commands ----------------------------------------------------------------


def cmd_calibrate(cfg: RunConfig, args) -> int:
    if cfg.economy_data is None and cfg.housing_data is None:
        raise UserError("calibrate needs economy.data and/or housing.data in the config")
    report: dict = {"version": __version__, "source": cfg.source}
    prod = None
    if cfg.economy_data is not None:
        prod = estimate_productivity(read_productivity_csv(cfg.economy_data))
        report["productivity"] = productivity_report(prod)
        if prod.gamma_hat is None:
            log.warning("VAR step rejected: %s", prod.var_rejected)
    if cfg.housing_data is not None:
        k = read_hpi_csv(cfg.housing_data)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = calibrate_hpi(k, prod, cfg.hpi_mode)
        for w in caught:
            log.warning("%s", w.message)
        report["hpi"] = hpi_report(est)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / "calibration.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _emit(f"wrote {path}", args)
    for section in ("productivity", "hpi"):
        if section in report:
            for key, value in report[section].items():
                _emit(f"{section}.{key} = {value}", args)
    return EXIT_OK


def cmd_simulate_economy(cfg: RunConfig, args) -> int:
    """Simulate paths and write the first one as productivity and HPI CSVs (calibrate's inputs)."""
    econ, h, _ = resolve_models(cfg)
    spec = cfg.sweep
    t0 = cfg.origin
    t1 = args.until if args.until is not None else spec.t_grid[-1] if spec.t_grid else t0 + 10
    if not t1 > t0:
        raise UserError(f"--until must exceed the origin {t0}")
    n_steps = max(1, int(round((t1 - t0) * spec.steps_per_year)))
    z = simulate_z(econ, t0, t1, n_steps, spec.paths, spec.seed)
    k = log_index_paths(h, z, spec.seed, origin=t0)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    theta = econ.mu + econ.varsigma * z.values[0]
    write_productivity_csv(out / "productivity.csv", TimeSeries(t0, z.t_end, theta))
    write_hpi_csv(out / "hpi.csv", z.times, np.exp(k.values[0, :, 0]))
    _emit(f"wrote {out / 'productivity.csv'} and {out / 'hpi.csv'} ({n_steps} steps, path 0 of {spec.paths})",
          args)
    return EXIT_OK


def cmd_renovation_date(cfg: RunConfig, args) -> int:
    scenario = cfg.scenario(args.scenario)
    building = cfg.building(args.building)
    t = args.at if args.at is not None else scenario.t_start_transition
    energy = cfg.energy[building.source].params_for(scenario)
    decision = optimal_renovation_date(building, scenario, energy, cfg.costs, t)
    print(format_decision(decision, scenario.t_start_transition))
    return EXIT_OK


def cmd_valuate(cfg: RunConfig, args) -> int:
    """Deterministic valuation at one date: efficient mean value, X and climate-adjusted mean."""
    econ, h, _ = resolve_models(cfg)
    t = args.at if args.at is not None else cfg.origin
    if t < cfg.origin:
        raise UserError(f"--at {t} precedes the origin {cfg.origin}")
    rows = []
    for s in cfg.scenarios:
        for b in cfg.buildings:
            energy = cfg.energy[b.source].params_for(s)
            decision = optimal_renovation_date(b, s, energy, cfg.costs, t)
            x = transition_cost_x(b, s, energy, cfg.costs, t, cfg.sweep.quadrature_points,
                                  cfg.sweep.quadrature, decision=decision)
            # mean of C_t seen from the origin; the economy noise integral has mean zero
            efficient = float(conditional_price_law(h, b, 0.0, t - cfg.origin).mean)
            rows.append((s.name, b.name, t, efficient, x, efficient - b.surface_r * x,
                         format_decision(decision, s.t_start_transition)))
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / "valuation.csv"
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["scenario", "building", "t", "efficient_mean", "x", "value_mean", "decision"])
        for r in rows:
            writer.writerow([r[0], r[1], "%.17g" % r[2], "%.17g" % r[3], "%.17g" % r[4], "%.17g" % r[5], r[6]])
    for r in rows:
        _emit(f"{r[0]:<22} {r[1]:<14} X={r[4]:12.4f}  value={r[5]:14.2f}  {r[6]}", args)
    _emit(f"wrote {path}", args)
    return EXIT_OK


def run_configured_sweep(cfg: RunConfig):
    """Run the sweep described by ``cfg``; returns (result, slowdown table or None, manifest)."""
    econ, h, report = resolve_models(cfg)
    spec = cfg.sweep_spec()
    result = run_sweep(spec, econ, h)
    table = None
    s = cfg.sweep
    if s.slowdown_from is not None and result.rows:
        table = annual_slowdown(result, spec.reference_name, s.slowdown_from, s.slowdown_to)
    manifest = to_document(cfg, econ, h)
    manifest["version"] = __version__
    if report:
        manifest["calibration"] = report
    return result, table, manifest


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = cfg.output_dir
    existed = out.exists()
    try:
        result, table, manifest = run_configured_sweep(cfg)
        emit_results(result, out, manifest, cfg.output_format)
        if table is not None:
            with open(out / "slowdown.csv", "w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["scenario", "building", "t_from", "t_to", "slowdown"])
                for (scn, bld), value in table.items():
                    writer.writerow([scn, bld, "%.17g" % cfg.sweep.slowdown_from,
                                     "%.17g" % cfg.sweep.slowdown_to, "%.17g" % value])
    except BaseException:
        if not existed and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        else:
            for name in ("results.csv", "manifest.json", "slowdown.csv"):
                (out / name).unlink(missing_ok=True)
        raise
    _emit(f"wrote {out / 'results.csv'} ({len(result.rows)} rows) and {out / 'manifest.json'}", args)
    if table is not None and not args.quiet:
        buildings = result.buildings
        print("slowdown (%/yr) vs " + result.reference + f", {cfg.sweep.slowdown_from:g}-{cfg.sweep.slowdown_to:g}")
        print(" " * 22 + "".join(f"{b:>14}" for b in buildings))
        for scn in result.scenarios:
            cells = "".join(f"{table[scn, b]:14.3f}" if not math.isnan(table[scn, b]) else f"{'undef':>14}"
                            for b in buildings)
            print(f"{scn:<22}{cells}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "simulate-economy": cmd_simulate_economy,
    "renovation-date": cmd_renovation_date,
    "valuate": cmd_valuate,
    "sweep": cmd_sweep,
}


def _global_flags(top: bool) -> argparse.ArgumentParser:
    # Sub-commands accept the global flags too; their defaults are suppressed
    # so a flag given before the command is not reset.
    def default(value):
        return value if top else argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default("builtin:france"),
                        help="YAML config file or builtin:NAME (default: builtin:france)")
    common.add_argument("--seed", type=int, default=default(None), help="override sweep.seed")
    common.add_argument("--out", default=default(None), help="override output.directory")
    common.add_argument("--paths", type=int, default=default(None), help="override sweep.paths")
    common.add_argument("--quiet", action="store_true", default=default(False),
                        help="only print errors and requested results")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(top=False)
    parser = argparse.ArgumentParser(prog="climhouse", description=__doc__, parents=[_global_flags(top=True)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="estimate parameters from CSV data")
    p = sub.add_parser("simulate-economy", parents=[common], help="write synthetic productivity and HPI CSVs")
    p.add_argument("--until", type=float, help="last simulated year (default: last t_grid year)")
    p = sub.add_parser("renovation-date", parents=[common], help="optimal renovation decision")
    p.add_argument("--scenario", required=True)
    p.add_argument("--building", required=True)
    p.add_argument("--at", type=float, help="valuation year (default: the scenario's transition start)")
    p = sub.add_parser("valuate", parents=[common], help="deterministic valuation at one date")
    p.add_argument("--at", type=float, help="valuation year (default: the origin)")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo scenario sweep")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DataError, EstimationError, UserError, KeyError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (NotHurwitzError, GridMismatchError, np.linalg.LinAlgError, FloatingPointError,
            OverflowError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
