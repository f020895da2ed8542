"""Experiment configuration: flat key=value files with unit-suffixed keys.

The format is deliberately primitive so files diff cleanly: one `key = value`
per line, `#` comments, no nesting. Physical quantities carry their unit in
the key name (t_wait_ms, bandwidth_khz, sample_size_kbits) and are converted
to SI on load; SNRs are written in dB and converted to linear ratios.
Unknown keys are rejected to catch typos, and every problem in the file is
reported at once rather than one per run.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import SystemParams, db_to_linear

SWEEP_AXES = ("lambda", "n_devices", "snr", "theta_e", "overtake_z")
RUN_MODES = ("blockfl", "vanilla", "standalone")

# Sweep grids used when a config names an axis but no values. The rate grid
# stops at 2/s: beyond that the expected number of fork retries per round,
# exp(rate * total link delay), grows into the thousands and a simulated
# round effectively never completes.
DEFAULT_GRIDS = {
    "lambda": tuple(float(v) for v in np.geomspace(0.05, 2.0, 20)),
    "n_devices": (2, 5, 10, 20, 40),
    "snr": (5.0, 10.0, 15.0, 20.0),
    "theta_e": (0.0, 0.25, 0.5, 0.75),
    "overtake_z": tuple(range(9)),
}

_INT_AXES = ("n_devices", "overtake_z")

_BOOL_WORDS = {"true": True, "on": True, "yes": True, "1": True,
               "false": False, "off": False, "no": False, "0": False}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment: base parameters plus orchestration knobs."""
    base: SystemParams
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    replications: int = 1
    master_seed: int = 0
    output_dir: str = "out"
    mode: str = "blockfl"
    baseline_vanilla: bool = False
    baseline_standalone: bool = False
    overtake_replications: int = 100_000


class ConfigError(ValueError):
    """Carries every problem found in a config, not just the first."""

    def __init__(self, errors):
        self.errors = tuple(errors)
        super().__init__("invalid config: " + "; ".join(self.errors))


def _parse_pairs(text: str, errors: list) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            errors.append(f"line {lineno}: empty key or value in {line!r}")
            continue
        if key in pairs:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value
    return pairs


def _get_float(pairs, key, errors):
    raw = pairs.pop(key, None)
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        errors.append(f"{key}: expected a number, got {raw!r}")
        return None


def _get_int(pairs, key, errors):
    raw = pairs.pop(key, None)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        errors.append(f"{key}: expected an integer, got {raw!r}")
        return None


def _get_bool(pairs, key, errors):
    raw = pairs.pop(key, None)
    if raw is None:
        return None
    value = _BOOL_WORDS.get(raw.lower())
    if value is None:
        errors.append(f"{key}: expected true/false/on/off, got {raw!r}")
    return value


def _get_str(pairs, key):
    return pairs.pop(key, None)


def _parse_sweep_values(raw: str, axis: str, errors: list) -> tuple:
    values = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            errors.append(f"sweep_values: empty entry in {raw!r}")
            continue
        try:
            values.append(int(token) if axis in _INT_AXES else float(token))
        except ValueError:
            kind = "an integer" if axis in _INT_AXES else "a number"
            errors.append(f"sweep_values: expected {kind}, got {token!r}")
    return tuple(values)


def _check_axis_values(axis: str, values, errors: list) -> None:
    if not values:
        errors.append(f"sweep over {axis} has no values")
        return
    for v in values:
        if axis == "lambda" and v <= 0.0:
            errors.append(f"lambda sweep value must be > 0, got {v}")
        elif axis == "n_devices" and v < 1:
            errors.append(f"n_devices sweep value must be >= 1, got {v}")
        elif axis == "theta_e" and not 0.0 <= v <= 1.0:
            errors.append(f"theta_e sweep value must lie in [0, 1], got {v}")
        elif axis == "overtake_z" and v < 0:
            errors.append(f"overtake_z sweep value must be >= 0, got {v}")


def load_config(path) -> ExperimentConfig:
    """Parse and fully validate a config file.

    Raises ConfigError listing every violation: malformed lines, unknown
    keys, out-of-range values, and parameter constraints.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    errors: list = []
    pairs = _parse_pairs(text, errors)

    kw = {}

    def put(name, value):
        if value is not None:
            kw[name] = value

    put("n_devices", _get_int(pairs, "n_devices", errors))
    put("n_miners", _get_int(pairs, "n_miners", errors))

    shared_bw = _get_float(pairs, "bandwidth_khz", errors)
    if shared_bw is not None:
        for name in ("uplink_bw_hz", "downlink_bw_hz", "miner_bw_hz"):
            kw[name] = shared_bw * 1e3
    for key, name in (("uplink_bandwidth_khz", "uplink_bw_hz"),
                      ("downlink_bandwidth_khz", "downlink_bw_hz"),
                      ("miner_bandwidth_khz", "miner_bw_hz")):
        value = _get_float(pairs, key, errors)
        if value is not None:
            kw[name] = value * 1e3

    shared_snr = _get_float(pairs, "snr_db", errors)
    if shared_snr is not None:
        for name in ("snr_uplink", "snr_downlink", "snr_miner"):
            kw[name] = db_to_linear(shared_snr)
    for key, name in (("uplink_snr_db", "snr_uplink"),
                      ("downlink_snr_db", "snr_downlink"),
                      ("miner_snr_db", "snr_miner")):
        value = _get_float(pairs, key, errors)
        if value is not None:
            kw[name] = db_to_linear(value)

    for key, name, scale in (("sample_size_kbits", "sample_size_bits", 1e3),
                             ("update_size_kbits", "update_size_bits", 1e3),
                             ("header_size_kbits", "header_size_bits", 1e3),
                             ("clock_ghz", "clock_hz", 1e9),
                             ("t_wait_ms", "t_wait_s", 1e-3),
                             ("t_ack_wait_ms", "t_ack_wait_s", 1e-3)):
        value = _get_float(pairs, key, errors)
        if value is not None:
            kw[name] = value * scale

    if "lambda_per_s" not in pairs:
        errors.append("missing required key lambda_per_s "
                      "(the block generation rate lambda)")
    put("block_rate", _get_float(pairs, "lambda_per_s", errors))

    for key in ("step_size", "convergence_eps", "data_noise_std",
                "accuracy_threshold", "energy_threshold", "malfunction_prob",
                "malfunction_noise_mean", "malfunction_noise_var",
                "reward_rate", "forge_inflation"):
        put(key, _get_float(pairs, key, errors))
    for key in ("model_dim", "sample_count_min", "sample_count_max",
                "max_epochs", "n_forging_devices"):
        put(key, _get_int(pairs, key, errors))
    for key in ("malfunction_enabled", "miners_are_devices",
                "sticky_association"):
        put(key, _get_bool(pairs, key, errors))
    put("winner_delay_mode", _get_str(pairs, "winner_delay_mode"))

    params = SystemParams(**kw)
    errors.extend(params.validation_errors())

    axis = _get_str(pairs, "sweep_axis")
    values_raw = _get_str(pairs, "sweep_values")
    values: tuple = ()
    if axis is not None and axis not in SWEEP_AXES:
        errors.append(f"sweep_axis must be one of {SWEEP_AXES}, got {axis!r}")
        axis = None
    if axis is not None:
        values = (_parse_sweep_values(values_raw, axis, errors)
                  if values_raw is not None else DEFAULT_GRIDS[axis])
        _check_axis_values(axis, values, errors)
        if axis == "overtake_z" and params.n_miners < 2:
            errors.append("an overtake_z sweep needs n_miners >= 2 "
                          "(one attacker racing the rest)")
    elif values_raw is not None:
        errors.append("sweep_values given without sweep_axis")

    replications = _get_int(pairs, "replications", errors)
    if replications is None:
        replications = 1
    elif replications < 1:
        errors.append(f"replications must be >= 1, got {replications}")

    master_seed = _get_int(pairs, "master_seed", errors)
    if master_seed is None:
        master_seed = 0

    output_dir = _get_str(pairs, "output_dir") or "out"

    mode = _get_str(pairs, "mode") or "blockfl"
    if mode not in RUN_MODES:
        errors.append(f"mode must be one of {RUN_MODES}, got {mode!r}")

    baseline_vanilla = _get_bool(pairs, "baseline_vanilla", errors) or False
    baseline_standalone = _get_bool(pairs, "baseline_standalone", errors) or False

    overtake_replications = _get_int(pairs, "overtake_replications", errors)
    if overtake_replications is None:
        overtake_replications = 100_000
    elif overtake_replications < 1:
        errors.append("overtake_replications must be >= 1, got "
                      f"{overtake_replications}")

    for key in sorted(pairs):
        errors.append(f"unknown key {key!r}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        base=params, sweep_axis=axis, sweep_values=values,
        replications=replications, master_seed=master_seed,
        output_dir=output_dir, mode=mode, baseline_vanilla=baseline_vanilla,
        baseline_standalone=baseline_standalone,
        overtake_replications=overtake_replications)
