"""Command-line entry point.

Subcommands: run (one training run), sweep (axis sweep with replications),
optimal-lambda (closed form vs numeric oracle), overtake (attacker race over
a head-start grid), validate-config (dry-run the loader). Report-producing
subcommands write the delimited output and a rendered figure into --out.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_GRIDS, ConfigError, ExperimentConfig, load_config
from .experiments import (emit_csv, emit_jsonl, run_rows, run_summary,
                          run_sweep, run_trace_records, EPOCH_COLUMNS)
from .latency import numeric_optimal_lambda, optimal_lambda
from .simulator import run_training

log = logging.getLogger(__name__)


def _add_common(parser, with_mode=False):
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master_seed from the config")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config output_dir)")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                        help="delimited output format")
    parser.add_argument("--malfunction", choices=("on", "off"), default=None,
                        help="override the miner malfunction switch")
    if with_mode:
        parser.add_argument("--mode",
                            choices=("blockfl", "vanilla", "standalone"),
                            default=None, help="override the run mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockfl-sim",
        description="Simulator for federated learning coordinated by a "
                    "proof-of-work miner network instead of a central server.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single training run")
    _add_common(p_run, with_mode=True)

    p_sweep = sub.add_parser("sweep", help="sweep one axis with replications")
    _add_common(p_sweep, with_mode=True)
    p_sweep.add_argument("--replications", type=int, default=None,
                         help="override replications from the config")
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="process pool size for sweep cells")

    p_opt = sub.add_parser("optimal-lambda",
                           help="closed-form optimal rate vs numeric oracle")
    p_opt.add_argument("--config", required=True)

    p_ot = sub.add_parser("overtake", help="malicious-miner overtake race")
    _add_common(p_ot)
    p_ot.add_argument("--replications", type=int, default=None,
                      help="override overtake_replications from the config")

    p_val = sub.add_parser("validate-config", help="check a config file")
    p_val.add_argument("--config", required=True)
    return parser


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "mode", None) is not None:
        config = replace(config, mode=args.mode)
    if getattr(args, "replications", None) is not None:
        if args.replications < 1:
            raise ConfigError(["--replications must be >= 1, got "
                               f"{args.replications}"])
        if args.command == "overtake":
            config = replace(config, overtake_replications=args.replications)
        else:
            config = replace(config, replications=args.replications)
    if getattr(args, "malfunction", None) is not None:
        config = replace(config, base=replace(
            config.base, malfunction_enabled=args.malfunction == "on"))
    if getattr(args, "out", None) is not None:
        config = replace(config, output_dir=args.out)
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(config: ExperimentConfig, fmt: str) -> int:
    result = run_training(config.base, config.master_seed, config.mode)
    out = _out_dir(config)
    if fmt == "csv":
        emit_csv(run_rows(result), out / "run_epochs.csv",
                 columns=EPOCH_COLUMNS)
    else:
        emit_jsonl(run_trace_records(result), out / "run_epochs.jsonl")
    from .plots import plot_run
    plot_run(result, out / "run.png")
    for key, value in run_summary(result).items():
        print(f"{key} = {value}")
    return 0


def _cmd_sweep(config: ExperimentConfig, fmt: str, workers: int) -> int:
    if config.sweep_axis is None:
        raise ConfigError(["sweep requires sweep_axis in the config"])
    result = run_sweep(config, workers=workers)
    out = _out_dir(config)
    suffix = "csv" if fmt == "csv" else "jsonl"
    data_path = out / f"sweep.{suffix}"
    (emit_csv if fmt == "csv" else emit_jsonl)(list(result.rows), data_path)
    from .plots import plot_sweep
    plot_sweep(result, out / "sweep.png")
    failed = [r for r in result.rows if r["failed"]]
    print(f"sweep over {config.sweep_axis}: {len(result.rows)} rows "
          f"({len(failed)} failed) -> {data_path}")
    for row in failed:
        print(f"  value {row['sweep_value']} [{row['mode']}]: {row['error']}")
    return 0


def _cmd_optimal_lambda(config: ExperimentConfig) -> int:
    closed = optimal_lambda(config.base)
    numeric = numeric_optimal_lambda(config.base)
    gap = abs(closed - numeric) / numeric
    print(f"closed_form_per_s = {closed}")
    print(f"numeric_per_s = {numeric}")
    print(f"relative_gap = {gap}")
    return 0


def _cmd_overtake(config: ExperimentConfig, fmt: str) -> int:
    if config.sweep_axis not in (None, "overtake_z"):
        raise ConfigError(["overtake needs sweep_axis = overtake_z "
                           f"(or none), got {config.sweep_axis}"])
    values = config.sweep_values or DEFAULT_GRIDS["overtake_z"]
    config = replace(config, sweep_axis="overtake_z", sweep_values=values)
    if config.base.n_miners < 2:
        raise ConfigError(["overtake needs n_miners >= 2"])
    result = run_sweep(config)
    out = _out_dir(config)
    data_path = out / ("overtake.csv" if fmt == "csv" else "overtake.jsonl")
    (emit_csv if fmt == "csv" else emit_jsonl)(list(result.rows), data_path)
    from .plots import plot_overtake
    plot_overtake(result, out / "overtake.png")
    for row in result.rows:
        print(f"z={row['sweep_value']}: simulated {row['overtake_probability']}"
              f" exact {row['exact_probability']}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "validate-config":
            print(f"{args.config}: ok")
            return 0
        config = _apply_overrides(config, args)
        if args.command == "run":
            return _cmd_run(config, args.format)
        if args.command == "sweep":
            return _cmd_sweep(config, args.format, args.workers)
        if args.command == "optimal-lambda":
            return _cmd_optimal_lambda(config)
        if args.command == "overtake":
            return _cmd_overtake(config, args.format)
        raise RuntimeError(f"unhandled command {args.command}")
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure, distinct exit code
        log.error("%s", exc, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
