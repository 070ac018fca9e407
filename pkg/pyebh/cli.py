"""Command line entry point: pyebh {simulate, analyze, calibrator-check, knockoff-check}."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from pyebh.analyze.procedures import BadTuning
from pyebh.config import (
    AnalyzeConfig,
    BaseConfig,
    CalibratorCheckConfig,
    ConfigError,
    KnockoffCheckConfig,
    SimulateConfig,
    load_config,
    parse_assignment,
)
from pyebh.core.calibrators import certify, parse_calibrator
from pyebh.core.knockoffs import KnockoffModel, build_knockoffs, gram_residuals, load_bundle, save_bundle, standardize
from pyebh.data.dataio import LabelError, SchemaError, analyze_dataset, load_dataset, load_panel, panel_table, preprocess
from pyebh.random.random_design import gen_design
from pyebh.simulate.harness import run_grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_CONFIG = 2

CONFIG_ERRORS = (ConfigError, SchemaError, LabelError, FileNotFoundError, BadTuning)
COMPUTE_ERRORS = (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError)


def _version() -> str:
    try:
        from pyebh.version import version
    except ImportError:
        return "unknown"
    return str(version)


def write_manifest(config: BaseConfig, subcommand: str) -> str:
    path = os.path.join(config.output_dir, "manifest.json")
    manifest = {
        "subcommand": subcommand,
        "config_sha256": config.sha256(),
        "seed": config.seed,
        "version": _version(),
        "config": config.to_dict(),
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def cmd_simulate(config: SimulateConfig) -> int:
    from pyebh.simulate.plotting import plot_grid

    tables = [run_grid(setting, config.gammas, threads=config.threads) for setting in config.settings()]
    table = pd.concat(tables, ignore_index=True)
    table.to_csv(os.path.join(config.output_dir, "simulation.csv"), index=False, float_format="%.17g")
    if config.plot:
        plot_grid(table, os.path.join(config.output_dir, "simulation.svg"))
    columns = ["n", "m", "k", "rho", "gamma", "method", "fdr_hat", "power_hat", "reps_completed"]
    print(table[columns].to_string(index=False))
    return EXIT_OK


def cmd_analyze(config: AnalyzeConfig) -> int:
    from pyebh.data.plotting import plot_panel

    panel = load_panel(config.panel_csv) if config.panel_csv else None
    calibrator = parse_calibrator(config.calibrator)
    tables = []
    for drug in config.drugs:
        ds = preprocess(
            load_dataset(config.resistance_csv, config.mutation_csv, drug, log_transform=config.log_transform),
            min_count=config.min_count,
        )
        reports = analyze_dataset(
            ds,
            config.alpha,
            methods=config.methods,
            lam=config.lam,
            calibrator=calibrator,
            grid_size=config.grid_size,
            grid_ratio=config.grid_ratio,
        )
        for code, report in reports.items():
            stem = os.path.join(config.output_dir, f"{drug}_{code}")
            frame = report.to_frame()
            frame.insert(1, "label", [ds.covariate_labels[j] for j in frame["j"]])
            frame.to_csv(stem + ".csv", index=False, float_format="%.17g")
            report.to_json(stem + ".json")
            print(f"{drug} {code}: {report.n_rejected} selected")
        if panel is not None:
            table = panel_table(reports, ds.covariate_labels, panel, drug)
            table.to_csv(os.path.join(config.output_dir, f"{drug}_panel.csv"), index=False)
            tables.append(table)
    if tables:
        summary = pd.concat(tables, ignore_index=True)
        print(summary.to_string(index=False))
        if config.plot:
            plot_panel(summary, os.path.join(config.output_dir, "panel.svg"))
    return EXIT_OK


def cmd_calibrator_check(config: CalibratorCheckConfig) -> int:
    rows = []
    for spec in config.calibrators:
        certificate = certify(parse_calibrator(spec), config.alpha, tol=config.tol)
        rows.append(
            {
                "calibrator": certificate.spec,
                "integral": certificate.integral,
                "bound": certificate.bound,
                "g0": certificate.value_at_zero,
                "monotone": certificate.monotone,
                "bounded_admissible": certificate.bounded_admissible,
                "passed": certificate.passed,
            }
        )
    table = pd.DataFrame(rows)
    table.to_csv(os.path.join(config.output_dir, "calibrators.csv"), index=False, float_format="%.17g")
    print(table.to_string(index=False))
    return EXIT_OK if table["passed"].all() else EXIT_COMPUTE


def _knockoff_model(config: KnockoffCheckConfig) -> KnockoffModel:
    if config.source == "bundle":
        return load_bundle(str(config.bundle_dir), check=False)
    if config.source == "dataset":
        ds = preprocess(
            load_dataset(str(config.resistance_csv), str(config.mutation_csv), str(config.drug)),
            min_count=config.min_count,
        )
        return build_knockoffs(standardize(ds.covariates, center=True))
    return build_knockoffs(standardize(gen_design(config.n, config.m, config.rho, config.seed)))


def cmd_knockoff_check(config: KnockoffCheckConfig) -> int:
    model = _knockoff_model(config)
    residuals = gram_residuals(model)
    if config.save_bundle:
        save_bundle(model, os.path.join(config.output_dir, "bundle"))
    with open(os.path.join(config.output_dir, "knockoff_residuals.json"), "w") as f:
        json.dump({"tol": config.tol, "residuals": residuals}, f, indent=2, sort_keys=True)
    failed = False
    for name, value in residuals.items():
        ok = value <= config.tol
        failed = failed or not ok
        print(f"{name:>16s} {value:.3e} {'ok' if ok else 'FAIL'}")
    return EXIT_COMPUTE if failed else EXIT_OK


COMMANDS: Dict[str, Callable[[Any], int]] = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "calibrator-check": cmd_calibrator_check,
    "knockoff-check": cmd_knockoff_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pyebh", description="e-value weighted FDR procedures with knockoffs")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", help="JSON config file")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--threads", type=int)
        sub.add_argument("--output-dir")
        sub.add_argument("--alpha", type=float)
        sub.add_argument("--reps", type=int)
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sub.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        sub.add_argument("-v", "--verbose", action="store_true", help="same as --log-level INFO")
    return parser


def _overrides(args: argparse.Namespace, fields: Sequence[str]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for flag in ("seed", "threads", "output_dir", "alpha", "reps"):
        value = getattr(args, flag)
        if value is None:
            continue
        if flag not in fields:
            raise ConfigError(f"--{flag.replace('_', '-')} does not apply to {args.subcommand}")
        overrides[flag] = value
    for assignment in args.set:
        key, value = parse_assignment(assignment)
        overrides[key] = value
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "INFO" if args.verbose and args.log_level == "WARNING" else args.log_level
    logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(name)s %(levelname)s: %(message)s")

    try:
        from pyebh.config import CONFIGS

        fields = [f for f in CONFIGS[args.subcommand].__dataclass_fields__]
        config = load_config(args.subcommand, args.config, _overrides(args, fields))
        os.makedirs(config.output_dir, exist_ok=True)
        status = COMMANDS[args.subcommand](config)
        write_manifest(config, args.subcommand)
    except CONFIG_ERRORS as e:
        print(f"pyebh: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except COMPUTE_ERRORS as e:
        print(f"pyebh: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTE
    return status


if __name__ == "__main__":
    sys.exit(main())
