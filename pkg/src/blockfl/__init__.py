"""Simulator and analytic toolkit for federated learning over a
proof-of-work miner network.

Devices train a shared regression model without a central server: local
updates are verified, mined into blocks, and propagated, and every device
recomputes the global weights from the accepted block. The package pairs
the round-by-round simulator with the closed-form latency model it should
follow, including the latency-optimal block-generation rate.
"""

from .config import ConfigError, ExperimentConfig, load_config
from .fl_core import GlobalModel, LocalUpdate, aggregate_global, local_epoch
from .latency import (LatencyBreakdown, expected_epoch_latency,
                      numeric_optimal_lambda, optimal_lambda)
from .params import SystemParams, db_to_linear
from .simulator import (EpochTrace, NoActiveMinersError, OvertakeEstimate,
                        RunResult, overtake_probability_exact, run_epoch,
                        run_training, simulate_overtake)
from .experiments import SweepResult, emit_results, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EpochTrace", "ExperimentConfig", "GlobalModel",
    "LatencyBreakdown", "LocalUpdate", "NoActiveMinersError",
    "OvertakeEstimate", "RunResult", "SweepResult", "SystemParams",
    "aggregate_global", "db_to_linear", "emit_results",
    "expected_epoch_latency", "load_config", "local_epoch",
    "numeric_optimal_lambda", "optimal_lambda", "overtake_probability_exact",
    "run_epoch", "run_sweep", "run_training", "simulate_overtake",
    "__version__",
]
