"""Sweep orchestration, replication statistics, and delimited output.

A sweep runs the training simulator (or the overtake race) over one axis,
with common random numbers across sweep points: replication r uses seed
master_seed + r at every point, so curves over the axis are paired and far
smoother than independent draws would give. Rows are assembled in a fixed
order and floats are written with full round-trip precision, which makes
output files byte-identical for identical configs regardless of how the
work was scheduled.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .latency import expected_epoch_latency, numeric_optimal_lambda, optimal_lambda
from .params import SystemParams, db_to_linear
from .simulator import (overtake_probability_exact, run_training,
                        simulate_overtake, trace_record)

TRAIN_COLUMNS = (
    "sweep_axis", "sweep_value", "mode", "replications",
    "mean_completion_latency_s", "se_completion_latency_s",
    "mean_epochs", "converged_fraction", "mean_epoch_latency_s",
    "mean_accuracy", "se_accuracy", "mean_test_mse", "se_test_mse",
    "mean_fork_attempts", "fork_rate",
    "mean_data_reward", "mean_mining_reward",
    "analytic_epoch_latency_s",
    "optimal_lambda_closed_form_per_s", "optimal_lambda_numeric_per_s",
    "failed", "error",
)

OVERTAKE_COLUMNS = (
    "sweep_axis", "sweep_value", "mode", "replications",
    "overtake_probability", "std_error", "exact_probability",
    "failed", "error",
)

EPOCH_COLUMNS = (
    "epoch", "fork_attempts", "winner", "active_miners", "observed_device",
    "t_local_s", "t_up_s", "t_cross_s", "t_bg_s", "t_bp_s", "t_dn_s",
    "t_global_s", "total_s", "weight_movement", "malfunction_miners",
    "rejected_devices",
)


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    rows: tuple


def rep_seed(master_seed: int, rep: int) -> int:
    """Replication seeds are consecutive so every sweep point shares them."""
    return master_seed + rep


def point_params(base: SystemParams, axis: str, value) -> SystemParams:
    """The base parameters with one sweep axis applied."""
    if axis == "lambda":
        return replace(base, block_rate=float(value))
    if axis == "n_devices":
        n = int(value)
        return replace(base, n_devices=n,
                       n_forging_devices=min(base.n_forging_devices, n))
    if axis == "snr":
        linear = db_to_linear(float(value))
        return replace(base, snr_uplink=linear, snr_downlink=linear,
                       snr_miner=linear)
    if axis == "theta_e":
        return replace(base, energy_threshold=float(value))
    raise ValueError(f"{axis!r} is not a parameter sweep axis")


def _mean_se(values) -> tuple:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize_point(results) -> dict:
    """Replication statistics for one (sweep value, mode) cell."""
    completion = [r.completion_latency for r in results]
    epochs = [len(r.epochs) for r in results]
    mean_completion, se_completion = _mean_se(completion)
    mean_acc, se_acc = _mean_se([r.accuracy for r in results])
    mean_mse, se_mse = _mean_se([r.mse for r in results])
    attempts = [t.fork_attempts for r in results for t in r.epochs]
    total_attempts = sum(attempts)
    return {
        "mean_completion_latency_s": mean_completion,
        "se_completion_latency_s": se_completion,
        "mean_epochs": float(np.mean(epochs)),
        "converged_fraction": float(np.mean(
            [r.converged_at is not None for r in results])),
        "mean_epoch_latency_s": float(np.mean(
            [c / e for c, e in zip(completion, epochs)])),
        "mean_accuracy": mean_acc,
        "se_accuracy": se_acc,
        "mean_test_mse": mean_mse,
        "se_test_mse": se_mse,
        "mean_fork_attempts": float(np.mean(attempts)),
        "fork_rate": (total_attempts - len(attempts)) / total_attempts,
        "mean_data_reward": float(np.mean(
            [r.rewards.total_data() for r in results])),
        "mean_mining_reward": float(np.mean(
            [r.rewards.total_mining() for r in results])),
    }


def _train_point_job(args) -> dict:
    axis, value, mode, params, master_seed, replications = args
    row = dict.fromkeys(TRAIN_COLUMNS)
    row.update(sweep_axis=axis, sweep_value=value, mode=mode,
               replications=replications, failed=False, error="")
    try:
        results = [run_training(params, rep_seed(master_seed, r), mode)
                   for r in range(replications)]
        row.update(summarize_point(results))
        row["analytic_epoch_latency_s"] = expected_epoch_latency(params)
        row["optimal_lambda_closed_form_per_s"] = optimal_lambda(params)
        row["optimal_lambda_numeric_per_s"] = numeric_optimal_lambda(params)
    except Exception as exc:  # a bad point must not sink the sweep
        row.update(failed=True, error=f"{type(exc).__name__}: {exc}")
    return row


def _overtake_point_job(args) -> dict:
    z, params, master_seed, n_replications = args
    row = dict.fromkeys(OVERTAKE_COLUMNS)
    row.update(sweep_axis="overtake_z", sweep_value=z, mode="overtake",
               replications=n_replications, failed=False, error="")
    try:
        rng = np.random.default_rng(np.random.SeedSequence((master_seed, 4, z)))
        est = simulate_overtake(z, params.n_miners - 1, params.block_rate,
                                n_replications, rng)
        row.update(overtake_probability=est.probability,
                   std_error=est.std_error,
                   exact_probability=overtake_probability_exact(
                       z, params.n_miners - 1))
    except Exception as exc:
        row.update(failed=True, error=f"{type(exc).__name__}: {exc}")
    return row


def run_sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Run every (sweep value, mode) cell and aggregate replications.

    Cells are independent, so with workers > 1 they are dispatched to a
    process pool; rows are reassembled in sweep order either way. A failing
    cell is flagged in its row instead of aborting the sweep.
    """
    if config.sweep_axis is None:
        raise ValueError("config has no sweep_axis; use run_training directly")
    if config.sweep_axis == "overtake_z":
        jobs = [(z, config.base, config.master_seed,
                 config.overtake_replications) for z in config.sweep_values]
        rows = _dispatch(_overtake_point_job, jobs, workers)
        return SweepResult(config=config, rows=tuple(rows))

    modes = [config.mode]
    if config.baseline_vanilla and "vanilla" not in modes:
        modes.append("vanilla")
    if config.baseline_standalone and "standalone" not in modes:
        modes.append("standalone")
    jobs = []
    for value in config.sweep_values:
        params = point_params(config.base, config.sweep_axis, value)
        for mode in modes:
            jobs.append((config.sweep_axis, value, mode, params,
                         config.master_seed, config.replications))
    rows = _dispatch(_train_point_job, jobs, workers)
    return SweepResult(config=config, rows=tuple(rows))


def _dispatch(job, args_list, workers: int) -> list:
    if workers <= 1 or len(args_list) <= 1:
        return [job(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, args_list))


# ---- Emission ----

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def emit_csv(rows, path, columns=None) -> None:
    """One row per (sweep value, statistic) cell; units live in the header."""
    if columns is None:
        columns = tuple(rows[0].keys()) if rows else TRAIN_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def emit_jsonl(rows, path) -> None:
    """One JSON object per line; floats keep full round-trip precision."""
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def emit_results(result: SweepResult, fmt: str, path) -> None:
    if fmt == "csv":
        emit_csv(result.rows, path)
    elif fmt == "jsonl":
        emit_jsonl(result.rows, path)
    else:
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")


def read_csv_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_jsonl_rows(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---- Single-run reports ----

def run_rows(result) -> list:
    """Per-round scalar rows for one training run."""
    rows = []
    prev_w = None
    for trace in result.epochs:
        b = trace.breakdown
        movement = (float(np.linalg.norm(trace.global_w_after - prev_w))
                    if prev_w is not None else float(np.linalg.norm(trace.global_w_after)))
        prev_w = trace.global_w_after
        rows.append({
            "epoch": trace.epoch,
            "fork_attempts": trace.fork_attempts,
            "winner": trace.winner,
            "active_miners": "|".join(str(m) for m in trace.active_miners),
            "observed_device": trace.observed_device,
            "t_local_s": b.t_local, "t_up_s": b.t_up, "t_cross_s": b.t_cross,
            "t_bg_s": b.t_bg, "t_bp_s": b.t_bp, "t_dn_s": b.t_dn,
            "t_global_s": b.t_global, "total_s": b.total,
            "weight_movement": movement,
            "malfunction_miners": "|".join(
                str(m) for m, _ in trace.malfunction_events),
            "rejected_devices": "|".join(
                str(d) for d in trace.rejected_devices),
        })
    return rows


def run_trace_records(result) -> list:
    return [trace_record(t) for t in result.epochs]


def run_summary(result) -> dict:
    return {
        "mode": result.mode,
        "seed": result.seed,
        "epochs": len(result.epochs),
        "converged_at": result.converged_at,
        "completion_latency_s": result.completion_latency,
        "accuracy": result.accuracy,
        "test_mse": result.mse,
        "total_data_reward": result.rewards.total_data(),
        "total_mining_reward": result.rewards.total_mining(),
    }
