"""Round-by-round execution of the chained federated-learning protocol.

One round: every device refines the shared weights on its own samples,
uploads the result to a uniformly drawn miner, miners cross-verify the
claimed sample counts and exchange the survivors, race on proof of work,
propagate the winning block (restarting the round whenever a runner-up
finishes inside its propagation window), and finally every device downloads
the block and recomputes the shared weights from its body.

Timing is purely virtual: every duration comes from the closed-form delay
model, so a (seed, params) pair fully determines a run. Random draws are
split over keyed streams

    (seed, 0)                    synthetic data,
    (seed, 1, device, round)     per-device sample orderings,
    (seed, 2)                    observed-device choice,
    (seed, 2, round, retry)      network events (batteries, associations,
                                 tokens, malfunction), in that fixed order,
    (seed, 3, round)             mining times,

so runs that differ only in the block-generation rate share everything but
the mining race, paired runs that differ in miner availability still share
batteries, faults and mining draws miner for miner, and the weight
trajectory never depends on the network streams at all while malfunction
is disabled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .chain import (Block, Ledger, RewardLedger, accrue_rewards, append_block,
                    claim_consistent, fill_candidate, make_ledger, seal_block)
from .fl_core import (GlobalModel, SyntheticData, aggregate_global,
                      anchor_gradient_sum, converged, draw_sample_counts,
                      generate_dataset, local_epoch, test_accuracy, test_mse)
from .latency import (LatencyBreakdown, block_propagation_delay,
                      cross_verification_delay, downlink_delay, global_delay,
                      link_propagation_delay, local_delay, make_breakdown,
                      uplink_delay)
from .params import SystemParams

log = logging.getLogger(__name__)

MODES = ("blockfl", "vanilla", "standalone")

_DATA_STREAM = 0
_PERM_STREAM = 1
_NET_STREAM = 2
_MINING_STREAM = 3

# consecutive battery-empty rounds tolerated before a run gives up
MAX_EMPTY_ROUNDS = 1000


class NoActiveMinersError(RuntimeError):
    """Every miner failed the battery check for the current round."""


def _stream(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed,) + key))


# ---- Domain records ----

@dataclass(frozen=True)
class EpochTrace:
    """Everything one round produced, for reporting and regression tests.

    step_times is the observed device's event clock: a cumulative timestamp
    after each protocol stage, five stages per mining attempt, then download
    and recombination. Its last entry agrees with breakdown.total up to
    float reassociation (the breakdown stores the per-attempt mean mining
    time, the clock the attempt-by-attempt values).
    """
    epoch: int
    active_miners: tuple
    associations: dict
    winner: int
    fork_attempts: int
    observed_device: int
    breakdown: LatencyBreakdown
    block: Block | None
    global_w_after: np.ndarray
    malfunction_events: tuple
    step_times: tuple
    rejected_devices: tuple


@dataclass(frozen=True)
class RunResult:
    mode: str
    seed: int
    epochs: list
    completion_latency: float
    final_weights: np.ndarray
    converged_at: int | None
    accuracy: float
    mse: float
    rewards: RewardLedger


@dataclass
class RunState:
    """Mutable cross-round state owned by a single training run."""
    seed: int
    mode: str
    data: SyntheticData
    model: GlobalModel
    views: dict
    ledger: Ledger | None
    rewards: RewardLedger
    observed_device: int
    sticky_associations: dict | None = None


# ---- Round building blocks ----

def apply_energy_threshold(miner_ids, rng: np.random.Generator,
                           params: SystemParams) -> tuple:
    """Battery check: each miner draws a normalized level once per round and
    participates iff it is at or above the threshold."""
    levels = rng.random(len(miner_ids))
    return tuple(m for m, level in zip(miner_ids, levels)
                 if level >= params.energy_threshold)


def draw_associations(device_ids, active_miners, rng: np.random.Generator,
                      params: SystemParams) -> dict:
    """Uniform device-to-miner assignment for one round.

    When the miners are the devices themselves, a device picks uniformly
    among the other active miners; with no candidate left it goes unserved
    this round. One uniform is consumed per device regardless, keeping the
    stream aligned between runs whose active sets differ.
    """
    assoc = {}
    for d in device_ids:
        u = rng.random()
        choices = active_miners
        if params.miners_are_devices:
            choices = tuple(m for m in active_miners if m != d)
        if not choices:
            continue
        assoc[d] = choices[min(int(u * len(choices)), len(choices) - 1)]
    return assoc


def mining_race(rng: np.random.Generator, block_rate: float, active_columns,
                n_registered: int, link_delay_s: float,
                max_attempts: int = 1_000_000):
    """Synchronized proof-of-work attempts until one survives forking.

    Each attempt draws one Exp(block_rate) completion time per *registered*
    miner and races only the active columns, so runs that differ in battery
    outcomes or thresholds still face the same draws miner for miner. The
    attempt forks when any runner-up finishes within one link-propagation
    window behind the winner (ties fork), and a forked attempt is retried
    from scratch. Returns (winner position in active_columns, attempt count,
    winner's time per attempt).

    max_attempts bounds the retry loop: beyond it the chain is considered
    stalled (the no-fork probability is so small that a round would
    practically never complete) and the round fails loudly.
    """
    cols = np.asarray(active_columns, dtype=np.intp)
    n_active = cols.size
    if n_active < 1:
        raise ValueError(f"need at least one active miner, got {n_active}")
    if n_registered < n_active:
        raise ValueError(f"{n_active} active miners among {n_registered}")
    if block_rate <= 0.0:
        raise ValueError(f"block_rate must be > 0, got {block_rate}")
    winner_times = []
    while len(winner_times) < max_attempts:
        times = rng.exponential(1.0 / block_rate, size=n_registered)[cols]
        w = int(np.argmin(times))
        winner_times.append(float(times[w]))
        if n_active == 1:
            return w, 1, winner_times
        margins = np.delete(times - times[w], w)
        if not np.any(margins <= link_delay_s):
            return w, len(winner_times), winner_times
    raise RuntimeError(
        f"round forked {max_attempts} times in a row; the block rate "
        f"{block_rate}/s stalls a {n_active}-miner chain")


def inject_malfunction(served_weights: np.ndarray, device_ids, associations,
                       active_miners, rng: np.random.Generator,
                       params: SystemParams):
    """Per-miner corruption of the aggregate it serves its devices.

    Each active miner independently malfunctions with malfunction_prob,
    drawing one Gaussian noise vector (component mean/variance from params)
    that shifts the weights every one of its devices downloads this round.
    Devices on healthy miners receive the exact aggregate. Returns
    (per-device weight views, ((miner_id, affected device ids), ...)).

    The trigger and the noise are drawn for every registered miner, active
    or not, so two runs that differ only in the battery threshold see the
    same fault on the same miner whenever it participates in both.
    """
    views = {d: served_weights for d in device_ids}
    events = []
    active = set(active_miners)
    std = math.sqrt(params.malfunction_noise_var)
    triggered = rng.random(params.n_miners) < params.malfunction_prob
    for m in range(1, params.n_miners + 1):
        if not triggered[m - 1]:
            continue
        noise = (params.malfunction_noise_mean
                 + std * rng.standard_normal(served_weights.shape[0]))
        if m not in active:
            continue
        affected = tuple(sorted(d for d, mi in associations.items() if mi == m))
        for d in affected:
            views[d] = served_weights + noise
        events.append((m, affected))
    return views, tuple(events)


def _population_gradient(datasets, views) -> np.ndarray:
    # Mean gradient over the given devices at their own anchors, summed in
    # ascending device order so every caller gets the same bits.
    total = None
    n_total = 0
    for ds in datasets:
        g = anchor_gradient_sum(ds, views[ds.device_id])
        total = g if total is None else total + g
        n_total += ds.n_samples
    return total / n_total


def _forger_ids(params: SystemParams) -> frozenset:
    # the lowest device ids inflate their sample-count claims
    return frozenset(range(1, params.n_forging_devices + 1))


def _claimed_count(n_samples: int, device_id: int, params: SystemParams) -> int:
    if device_id in _forger_ids(params):
        return max(1, int(round(n_samples * params.forge_inflation)))
    return n_samples


def _step_clock(t_local, t_up, t_cross, winner_times, t_bp, t_dn, t_global):
    marks = [0.0]
    t = 0.0
    for t_bg in winner_times:
        for dt in (t_local, t_up, t_cross, t_bg, t_bp):
            t += dt
            marks.append(t)
    t += t_dn
    marks.append(t)
    t += t_global
    marks.append(t)
    return tuple(marks)


# ---- One full round ----

def run_epoch(state: RunState, params: SystemParams,
              rng: np.random.Generator) -> EpochTrace:
    """Advance the chained protocol by one round, mutating state.

    rng is the round's network stream: batteries, associations, the winning
    proof-of-work token and malfunction draws come from it in that order
    (run_training keys one stream per round and retry).

    Raises NoActiveMinersError before touching the state when every miner
    fails the battery check, so the caller may simply retry. A fork restarts
    the round internally: devices recompute the identical update (same data,
    same anchor, same ordering), so only the latency accounting repeats.
    """
    epoch = state.model.epoch + 1
    miners = tuple(range(1, params.n_miners + 1))
    active = apply_energy_threshold(miners, rng, params)
    if not active:
        raise NoActiveMinersError(
            f"all {params.n_miners} miners below battery threshold "
            f"{params.energy_threshold} in round {epoch}")

    device_ids = [ds.device_id for ds in state.data.devices]
    if params.sticky_association:
        if state.sticky_associations is None:
            state.sticky_associations = draw_associations(device_ids, active,
                                                          rng, params)
        associations = {d: m for d, m in state.sticky_associations.items()
                        if m in active}
    else:
        associations = draw_associations(device_ids, active, rng, params)

    # Inclusion is decided by claims and arrival times alone, so the verified
    # set (and with it the population gradient) is known before training.
    t_up = uplink_delay(params)
    claims = {}
    included = []
    rejected = []
    for ds in state.data.devices:
        d = ds.device_id
        t_loc = local_delay(ds.n_samples, params)
        claims[d] = (t_loc, _claimed_count(ds.n_samples, d, params))
        if d not in associations:
            rejected.append(d)
            continue
        ok = (t_loc + t_up <= params.t_wait_s
              and claim_consistent(t_loc, claims[d][1], params)
              and len(included) < params.n_devices)
        (included if ok else rejected).append(d)
    if not included:
        raise RuntimeError(f"round {epoch}: no verifiable update arrived "
                           "before the fill deadline")
    included_set = set(included)
    global_grad = _population_gradient(
        [ds for ds in state.data.devices if ds.device_id in included_set],
        state.views)

    # Local training. Rejected honest devices would train too, but their
    # uploads never reach a block, so only verified devices and forgers
    # (whose rejection the miners must exercise) are simulated.
    timed = []
    for ds in state.data.devices:
        d = ds.device_id
        if d not in included_set and d not in _forger_ids(params):
            continue
        perm_rng = _stream(state.seed, _PERM_STREAM, d, epoch)
        upd = local_epoch(ds, state.views[d], global_grad, params.step_size,
                          params, epoch, perm_rng)
        if d in _forger_ids(params):
            upd = replace(upd, n_samples=claims[d][1])
        timed.append((upd.t_local + t_up, upd))

    mine_rng = _stream(state.seed, _MINING_STREAM, epoch)
    link = link_propagation_delay(params)
    w_idx, attempts, winner_times = mining_race(
        mine_rng, params.block_rate, [m - 1 for m in active],
        params.n_miners, link)
    winner = active[w_idx]

    candidate, _ = fill_candidate(winner, timed, params, epoch,
                                  prev_digest=state.ledger.tip_digest)
    assert sorted(u.device_id for u in candidate.body) == included
    token = int(rng.integers(0, 2 ** 63))
    block = seal_block(candidate, state.ledger.tip_digest, token,
                       state.ledger.height + 1)
    append_block(state.ledger, block)
    miner_devices = {}
    for d, m in associations.items():
        miner_devices.setdefault(m, []).append(d)
    accrue_rewards(state.rewards, block, miner_devices)

    new_model = aggregate_global(state.model, block.body)
    if params.malfunction_enabled and params.malfunction_prob > 0.0:
        views, events = inject_malfunction(new_model.weights, device_ids,
                                           associations, active, rng, params)
    else:
        views = {d: new_model.weights for d in device_ids}
        events = ()

    observed = state.observed_device
    obs_miner = associations.get(observed)
    verified_per_miner = {m: 0 for m in active}
    for d in included:
        verified_per_miner[associations[d]] += 1
    loads = [verified_per_miner[m] for m in active if m != obs_miner]
    t_loc_o = claims[observed][0]
    t_cross = cross_verification_delay(t_loc_o, t_up, params, loads)
    t_bp = block_propagation_delay(params, len(active))
    t_dn = downlink_delay(params)
    t_glob = global_delay(params)
    breakdown = make_breakdown(t_loc_o, t_up, t_cross,
                               float(np.mean(winner_times)), t_bp, t_dn,
                               t_glob, attempts)

    state.model = new_model
    state.views = views
    return EpochTrace(
        epoch=epoch,
        active_miners=active,
        associations=associations,
        winner=winner,
        fork_attempts=attempts,
        observed_device=observed,
        breakdown=breakdown,
        block=block,
        global_w_after=new_model.weights,
        malfunction_events=events,
        step_times=_step_clock(t_loc_o, t_up, t_cross, winner_times, t_bp,
                               t_dn, t_glob),
        rejected_devices=tuple(rejected),
    )


def _run_vanilla_epoch(state: RunState, params: SystemParams,
                       rng: np.random.Generator) -> EpochTrace:
    """Central-server round: no miners, no mining, no forking.

    The server trusts every upload, so inflated sample-count claims skew the
    aggregation weights instead of being filtered out.
    """
    epoch = state.model.epoch + 1
    device_ids = [ds.device_id for ds in state.data.devices]
    global_grad = _population_gradient(state.data.devices, state.views)
    updates = []
    for ds in state.data.devices:
        d = ds.device_id
        perm_rng = _stream(state.seed, _PERM_STREAM, d, epoch)
        upd = local_epoch(ds, state.views[d], global_grad, params.step_size,
                          params, epoch, perm_rng)
        claimed = _claimed_count(ds.n_samples, d, params)
        if claimed != upd.n_samples:
            upd = replace(upd, n_samples=claimed)
        updates.append(upd)

    new_model = aggregate_global(state.model, updates)
    state.model = new_model
    state.views = {d: new_model.weights for d in device_ids}

    observed = state.observed_device
    t_loc_o = local_delay(
        next(ds for ds in state.data.devices
             if ds.device_id == observed).n_samples, params)
    t_up = uplink_delay(params)
    t_dn = downlink_delay(params)
    t_glob = global_delay(params)
    breakdown = make_breakdown(t_loc_o, t_up, 0.0, 0.0, 0.0, t_dn, t_glob, 1)
    return EpochTrace(
        epoch=epoch,
        active_miners=(0,),
        associations={d: 0 for d in device_ids},
        winner=0,
        fork_attempts=1,
        observed_device=observed,
        breakdown=breakdown,
        block=None,
        global_w_after=new_model.weights,
        malfunction_events=(),
        step_times=_step_clock(t_loc_o, t_up, 0.0, [0.0], 0.0, t_dn, t_glob),
        rejected_devices=(),
    )


# ---- Whole runs ----

def run_training(params: SystemParams, seed: int,
                 mode: str = "blockfl") -> RunResult:
    """Train until the global weights settle within eps, or the round cap.

    Modes: "blockfl" runs the full chained protocol; "vanilla" aggregates
    through a trusted central server (a single-miner network without mining
    or propagation); "standalone" lets each device train alone on its own
    samples. Hitting the round cap without converging flags the result
    (converged_at is None); it is not an error.
    """
    params.validate()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "vanilla" and params.n_miners != 1:
        params = replace(params, n_miners=1)

    data_rng = _stream(seed, _DATA_STREAM)
    counts = draw_sample_counts(data_rng, params.n_devices,
                                params.sample_count_min, params.sample_count_max)
    data = generate_dataset(data_rng, params.n_devices, counts,
                            params.model_dim, params.data_noise_std)
    net_rng = _stream(seed, _NET_STREAM)
    observed = int(net_rng.integers(1, params.n_devices + 1))
    if mode == "standalone":
        return _run_standalone(params, seed, data, observed)

    model = GlobalModel(weights=np.zeros(params.model_dim), epoch=0)
    state = RunState(
        seed=seed, mode=mode, data=data, model=model,
        views={d: model.weights for d in (ds.device_id for ds in data.devices)},
        ledger=make_ledger(params.block_rate) if mode == "blockfl" else None,
        rewards=RewardLedger(reward_rate=params.reward_rate),
        observed_device=observed)

    traces = []
    completion = 0.0
    converged_at = None
    for _ in range(params.max_epochs):
        prev = state.model
        if mode == "blockfl":
            trace = _epoch_with_battery_retry(state, params)
        else:
            trace = _run_vanilla_epoch(state, params, net_rng)
        traces.append(trace)
        completion += trace.breakdown.total
        if converged(prev, state.model, params.convergence_eps):
            converged_at = state.model.epoch
            break

    return RunResult(
        mode=mode, seed=seed, epochs=traces, completion_latency=completion,
        final_weights=state.model.weights, converged_at=converged_at,
        accuracy=test_accuracy(state.model.weights, data.test_features,
                               data.test_targets, params.accuracy_threshold),
        mse=test_mse(state.model.weights, data.test_features, data.test_targets),
        rewards=state.rewards)


def _epoch_with_battery_retry(state, params) -> EpochTrace:
    # A battery-empty round simply repeats with fresh draws; it adds no
    # latency because nothing was transmitted or mined. The retry index is
    # part of the stream key, otherwise a repeat would redraw the same
    # batteries forever.
    epoch = state.model.epoch + 1
    for retry in range(MAX_EMPTY_ROUNDS):
        net = _stream(state.seed, _NET_STREAM, epoch, retry)
        try:
            return run_epoch(state, params, net)
        except NoActiveMinersError:
            continue
    raise NoActiveMinersError(
        f"no active miner in {MAX_EMPTY_ROUNDS} consecutive rounds "
        f"(threshold {params.energy_threshold})")


def _run_standalone(params: SystemParams, seed: int, data: SyntheticData,
                    observed: int) -> RunResult:
    """Isolated training: every device anchors on its own mean gradient.

    There is no shared model; reported weights and test metrics are averages
    over the device population, and a round's latency is just the observed
    device's computation time. The run converges when every device's
    per-round movement is within eps.
    """
    weights = {ds.device_id: np.zeros(params.model_dim) for ds in data.devices}
    device_ids = [ds.device_id for ds in data.devices]
    traces = []
    completion = 0.0
    converged_at = None
    t_loc_o = local_delay(
        next(ds for ds in data.devices if ds.device_id == observed).n_samples,
        params)
    for epoch in range(1, params.max_epochs + 1):
        movement = 0.0
        for ds in data.devices:
            d = ds.device_id
            own_grad = anchor_gradient_sum(ds, weights[d]) / ds.n_samples
            perm_rng = _stream(seed, _PERM_STREAM, d, epoch)
            upd = local_epoch(ds, weights[d], own_grad, params.step_size,
                              params, epoch, perm_rng)
            movement = max(movement,
                           float(np.linalg.norm(upd.weights - weights[d])))
            weights[d] = upd.weights
        mean_w = np.mean([weights[d] for d in device_ids], axis=0)
        breakdown = make_breakdown(t_loc_o, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1)
        traces.append(EpochTrace(
            epoch=epoch, active_miners=(0,),
            associations={d: 0 for d in device_ids}, winner=0,
            fork_attempts=1, observed_device=observed, breakdown=breakdown,
            block=None, global_w_after=mean_w, malfunction_events=(),
            step_times=_step_clock(t_loc_o, 0.0, 0.0, [0.0], 0.0, 0.0, 0.0),
            rejected_devices=()))
        completion += breakdown.total
        if movement <= params.convergence_eps:
            converged_at = epoch
            break

    accs = [test_accuracy(weights[d], data.test_features, data.test_targets,
                          params.accuracy_threshold) for d in device_ids]
    mses = [test_mse(weights[d], data.test_features, data.test_targets)
            for d in device_ids]
    return RunResult(
        mode="standalone", seed=seed, epochs=traces,
        completion_latency=completion,
        final_weights=np.mean([weights[d] for d in device_ids], axis=0),
        converged_at=converged_at,
        accuracy=float(np.mean(accs)), mse=float(np.mean(mses)),
        rewards=RewardLedger(reward_rate=params.reward_rate))


# ---- Overtake race ----

@dataclass(frozen=True)
class OvertakeEstimate:
    probability: float
    std_error: float
    n_replications: int
    n_overtakes: int


def overtake_probability_exact(z: int, n_honest: int) -> float:
    """Chance the attacker's chain ever passes the honest one from z behind.

    The block race is a biased walk on the attacker's lead (up with
    probability 1/(1+n_honest)), so the ruin bound gives
    (1/n_honest)^(z+1); with one honest miner the walk is symmetric and the
    overtake is certain.
    """
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    if n_honest < 1:
        raise ValueError(f"n_honest must be >= 1, got {n_honest}")
    if n_honest == 1:
        return 1.0
    return (1.0 / n_honest) ** (z + 1)


def simulate_overtake(z: int, n_honest: int, block_rate: float,
                      n_replications: int, rng: np.random.Generator,
                      deficit_limit: int = 100) -> OvertakeEstimate:
    """Monte Carlo race between one attacker and n_honest honest miners.

    All miners mine at block_rate, so by memorylessness each next block is
    the attacker's with probability 1/(1+n_honest) independently; the rate
    itself cancels out of the result. The attacker starts z blocks behind
    and overtakes on ever leading by one block. Walks are abandoned once the
    deficit reaches deficit_limit, which for any n_honest >= 2 leaves
    residual probability far below the Monte Carlo resolution.
    """
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    if n_honest < 1:
        raise ValueError(f"n_honest must be >= 1, got {n_honest}")
    if block_rate <= 0.0:
        raise ValueError(f"block_rate must be > 0, got {block_rate}")
    if n_replications < 1:
        raise ValueError(f"n_replications must be >= 1, got {n_replications}")
    if deficit_limit <= z:
        raise ValueError(f"deficit_limit {deficit_limit} must exceed z={z}")

    p_attacker = 1.0 / (1.0 + n_honest)
    lead = np.full(n_replications, -z, dtype=np.int64)
    alive = np.ones(n_replications, dtype=bool)
    wins = 0
    while alive.any():
        idx = np.flatnonzero(alive)
        up = rng.random(idx.size) < p_attacker
        lead[idx] += np.where(up, 1, -1)
        now = lead[idx]
        won = now >= 1
        lost = now <= -deficit_limit
        wins += int(won.sum())
        alive[idx[won | lost]] = False
    p = wins / n_replications
    se = math.sqrt(p * (1.0 - p) / n_replications)
    return OvertakeEstimate(probability=p, std_error=se,
                            n_replications=n_replications, n_overtakes=wins)


# ---- Trace serialization (line-delimited records) ----

def trace_record(trace: EpochTrace) -> dict:
    """JSON-ready dict of one round, floats at full precision.

    The layout is the golden-trace interchange format: scalar round facts,
    the stage breakdown, the event clock, and the accepted block with its
    digest-relevant fields.
    """
    b = trace.breakdown
    record = {
        "epoch": trace.epoch,
        "active_miners": list(trace.active_miners),
        "associations": {str(d): m for d, m in sorted(trace.associations.items())},
        "winner": trace.winner,
        "fork_attempts": trace.fork_attempts,
        "observed_device": trace.observed_device,
        "breakdown": {
            "t_local_s": b.t_local, "t_up_s": b.t_up, "t_cross_s": b.t_cross,
            "t_bg_s": b.t_bg, "t_bp_s": b.t_bp, "t_dn_s": b.t_dn,
            "t_global_s": b.t_global, "n_fork": b.n_fork, "total_s": b.total,
        },
        "step_times_s": list(trace.step_times),
        "global_w_after": [float(v) for v in trace.global_w_after],
        "malfunction_events": [[m, list(devs)] for m, devs in trace.malfunction_events],
        "rejected_devices": list(trace.rejected_devices),
    }
    if trace.block is None:
        record["block"] = None
    else:
        blk = trace.block
        record["block"] = {
            "height": blk.header.height,
            "prev_digest": blk.header.prev_digest,
            "block_rate_per_s": blk.header.block_rate,
            "pow_token": blk.header.pow_token,
            "miner_id": blk.miner_id,
            "epoch": blk.epoch,
            "body": [{
                "device_id": u.device_id,
                "n_samples": u.n_samples,
                "t_local_s": u.t_local,
                "weights": [float(v) for v in u.weights],
                "grad_sum": [float(v) for v in u.grad_sum],
            } for u in blk.body],
        }
    return record
