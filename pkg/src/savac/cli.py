"""Command line entry point.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures (the manifest still records how many paths failed).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import (
    ConfigError,
    ExperimentConfig,
    PRESETS,
    load_config_dict,
    parse_config,
    preset_config,
)
from .linsolve import SolverError
from .montecarlo import EnsembleError, run_ensemble
from .report import emit_report
from .schemes import SchemeError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="savac",
        description="Monte-Carlo refinement study for stochastic Allen-Cahn schemes",
    )
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument(
        "--preset",
        choices=sorted(PRESETS),
        help="named experiment preset (a --config file overrides its entries)",
    )
    parser.add_argument("--outdir", required=True, help="output directory")
    parser.add_argument("--paths", type=int, help="override the number of sample paths")
    parser.add_argument("--seed", type=int, help="override the base seed")
    parser.add_argument(
        "--schemes",
        help="comma-separated subset of schemes to run "
        "(augmented_sav, standard_sav, implicit_nonlinear)",
    )
    parser.add_argument(
        "--no-figures", action="store_true", help="emit tables only, skip PNG rendering"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("either --config or --preset is required")
    if args.preset is not None:
        overrides = load_config_dict(args.config) if args.config is not None else {}
        config = preset_config(args.preset, **overrides)
    else:
        config = parse_config(args.config)

    replacements = {}
    if args.paths is not None:
        replacements["n_paths"] = args.paths
    if args.seed is not None:
        replacements["base_seed"] = args.seed
    if args.schemes is not None:
        replacements["schemes"] = tuple(
            name.strip() for name in args.schemes.split(",") if name.strip()
        )
    if replacements:
        config = dataclasses.replace(config, **replacements)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        config = _resolve_config(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2

    try:
        report = run_ensemble(config)
    except (EnsembleError, SchemeError, SolverError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3

    manifest = emit_report(report, args.outdir, figures=not args.no_figures)
    if manifest.n_paths_failed:
        print(
            f"{manifest.n_paths_failed} of {config.n_paths} paths failed; "
            f"statistics use the remaining {manifest.n_paths_completed}",
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
