"""End-to-end checks of the headline behaviors at reference scale.

Every test here runs the real pipeline at the reference parameters (ten
devices, ten miners, 300 kHz / 10 dB links) and prints one bracketed
pass/fail line with the measured numbers before asserting, so a transcript
of this module doubles as the results table. Monte Carlo comparisons use
fixed seeds and 3-standard-error bands unless a tighter bound is stated.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from statistics import fmean

import numpy as np
import pytest

from blockfl.chain import verify_update
from blockfl.config import DEFAULT_GRIDS, ExperimentConfig
from blockfl.experiments import rep_seed, run_sweep
from blockfl.fl_core import LocalUpdate, sample_gradient
from blockfl.latency import (
    fork_probability_analytic,
    link_propagation_delay,
    local_delay,
    optimal_lambda,
    winner_expected_delay,
)
from blockfl.params import SystemParams
from blockfl.simulator import (
    mining_race,
    overtake_probability_exact,
    run_training,
    simulate_overtake,
)

DEFAULTS = SystemParams()
RATE_GRID = DEFAULT_GRIDS["lambda"]
WORKERS = min(8, os.cpu_count() or 1)


def report(ok: bool, label: str, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    print(line)
    assert ok, line


def _completion(args) -> float:
    params, seed = args
    return run_training(params, seed).completion_latency


def completions(params, seeds):
    """Completion latency per seed, fanned out over a process pool."""
    jobs = [(params, s) for s in seeds]
    if WORKERS <= 1:
        return [_completion(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=WORKERS) as pool:
        return list(pool.map(_completion, jobs))


@pytest.fixture(scope="module")
def rate_curve():
    """Mean completion latency over the 20-point rate grid, 50 paired
    replications per point, plus the same statistic at the closed-form
    optimal rate."""
    config = ExperimentConfig(base=DEFAULTS, sweep_axis="lambda",
                              sweep_values=RATE_GRID, replications=50,
                              master_seed=0)
    rows = run_sweep(config, workers=WORKERS).rows
    assert not any(r["failed"] for r in rows)
    star = optimal_lambda(DEFAULTS)
    at_star = fmean(completions(replace(DEFAULTS, block_rate=star),
                                [rep_seed(0, r) for r in range(50)]))
    return {
        "means": [r["mean_completion_latency_s"] for r in rows],
        "star": star,
        "mean_at_star": at_star,
    }


def test_closed_form_rate_is_within_3pct_of_simulated_minimum(rate_curve):
    grid_min = min(rate_curve["means"])
    excess = rate_curve["mean_at_star"] / grid_min - 1.0
    report(excess <= 0.03,
           "closed-form rate vs simulated grid minimum",
           f"rate {rate_curve['star']:.4f}/s, latency "
           f"{rate_curve['mean_at_star']:.2f}s vs grid min {grid_min:.2f}s "
           f"(excess {100 * excess:+.2f}%, allowed +3%)")


def test_mean_latency_over_the_rate_grid_is_unimodal(rate_curve):
    means = rate_curve["means"]
    minima = [i for i in range(len(means))
              if (i == 0 or means[i] < means[i - 1])
              and (i == len(means) - 1 or means[i] < means[i + 1])]
    report(len(minima) == 1,
           "latency curve over the rate grid",
           f"{len(minima)} local minim{'um' if len(minima) == 1 else 'a'} "
           f"at grid position(s) {minima} of {len(means)}")


def test_chained_and_central_training_agree_bit_for_bit():
    chained = run_training(DEFAULTS, seed=7, mode="blockfl")
    central = run_training(DEFAULTS, seed=7, mode="vanilla")
    same_len = len(chained.epochs) == len(central.epochs)
    same_traj = same_len and all(
        np.array_equal(a.global_w_after, b.global_w_after)
        for a, b in zip(chained.epochs, central.epochs))
    acc_diff = abs(chained.accuracy - central.accuracy)
    report(same_traj and acc_diff == 0.0,
           "chained vs central trajectories",
           f"{len(chained.epochs)} rounds bit-identical={same_traj}, "
           f"accuracy difference {acc_diff}")


def test_winner_mining_time_matches_pooled_exponential_mean():
    rate, n_miners, n_draws = 0.5, 10, 100_000
    rng = np.random.default_rng(44)
    mc = rng.exponential(1.0 / rate, size=(n_draws, n_miners)).min(axis=1).mean()
    target = winner_expected_delay(rate, n_miners)
    rel = abs(mc - target) / target
    report(rel <= 0.01,
           "first-success time over ten miners",
           f"mean {mc:.5f}s vs 1/(rate*n)={target:.5f}s "
           f"(rel err {100 * rel:.3f}%, allowed 1%) at {n_draws} draws")


def test_fork_retry_counts_follow_the_geometric_law():
    link = link_propagation_delay(DEFAULTS)
    cols = list(range(DEFAULTS.n_miners))
    details = []
    ok = True
    for k, rate in enumerate((0.5, 1.0, 2.0)):
        rng = np.random.default_rng(np.random.SeedSequence((55, k)))
        attempts = np.array([mining_race(rng, rate, cols, DEFAULTS.n_miners,
                                         link)[1]
                             for _ in range(10_000)], dtype=float)
        p_fork = fork_probability_analytic(rate, [link] * (len(cols) - 1))
        target = 1.0 / (1.0 - p_fork)
        se = attempts.std(ddof=1) / math.sqrt(attempts.size)
        gap = abs(attempts.mean() - target)
        ok = ok and gap <= 3 * se
        details.append(f"rate {rate}/s: mean {attempts.mean():.2f} vs "
                       f"{target:.2f} ({gap / se:.1f} se)")
    report(ok, "fork retries per round over 1e4 rounds", "; ".join(details))


def test_miner_redundancy_beats_a_single_miner_under_faults():
    seeds = list(range(40))
    faulty = replace(DEFAULTS, malfunction_enabled=True)
    many = completions(faulty, seeds)
    single = completions(replace(faulty, n_miners=1), seeds)
    wins = sum(m < s for m, s in zip(many, single))
    report(wins >= 28,
           "ten miners vs one under injected faults",
           f"ten-miner run finished first in {wins}/40 paired seeds "
           f"(need 28); means {fmean(many):.1f}s vs {fmean(single):.1f}s")


def test_device_count_has_an_interior_latency_optimum():
    config = ExperimentConfig(base=replace(DEFAULTS, malfunction_enabled=True),
                              sweep_axis="n_devices",
                              sweep_values=(2, 5, 10, 20, 40),
                              replications=40, master_seed=0)
    rows = run_sweep(config, workers=WORKERS).rows
    assert not any(r["failed"] for r in rows)
    means = [r["mean_completion_latency_s"] for r in rows]
    best = means.index(min(means))
    interior = 0 < best < len(means) - 1
    report(interior,
           "latency over the device-count grid",
           f"means {[round(m, 1) for m in means]} s over "
           f"{list(config.sweep_values)} devices; minimum at "
           f"{config.sweep_values[best]}")


def test_battery_threshold_ordering_flips_under_faults():
    """Raising the battery threshold (fewer active miners per round) should
    be free or better on a clean network, and should backfire once miners
    can corrupt what they serve.

    Known failure: the clean half holds, but the fault-induced reversal
    lands near 21/40 paired seeds against the 28/40 bar. Per-round view
    resets bound the damage of one fault to roughly one round, so the
    fault differential stays near +0.3 s per run while the fork lottery
    moves pairs by several seconds either way. The bar is kept rather
    than loosened; see README, "Known failing test".
    """
    # run above the reference rate so fork exposure, not the mining wait,
    # dominates the cost of extra active miners
    base = replace(DEFAULTS, block_rate=0.35)
    seeds = list(range(40))
    clean_all = completions(base, seeds)
    clean_half = completions(replace(base, energy_threshold=0.5), seeds)
    faulty = replace(base, malfunction_enabled=True)
    faulty_all = completions(faulty, seeds)
    faulty_half = completions(replace(faulty, energy_threshold=0.5), seeds)

    clean_ok = fmean(clean_half) <= fmean(clean_all)
    reversals = sum(h > a for h, a in zip(faulty_half, faulty_all))
    report(clean_ok and reversals >= 28,
           "battery-threshold ordering with and without faults",
           f"clean means: threshold 0.5 {fmean(clean_half):.2f}s vs 0.0 "
           f"{fmean(clean_all):.2f}s (must not increase); with faults the "
           f"ordering reversed in {reversals}/40 paired seeds (need 28)")


def test_overtake_probability_matches_the_ruin_law_and_decays():
    n_honest, n_reps = 9, 100_000
    details = []
    ok = True
    for z in range(9):
        rng = np.random.default_rng(np.random.SeedSequence((66, z)))
        est = simulate_overtake(z, n_honest, DEFAULTS.block_rate, n_reps, rng)
        exact = overtake_probability_exact(z, n_honest)
        if z <= 3:
            se = max(est.std_error, math.sqrt(exact * (1 - exact) / n_reps))
            good = abs(est.probability - exact) <= 3 * se
            details.append(f"z={z}: {est.probability:.2e} vs {exact:.2e}")
        else:
            good = est.probability < 1e-3
        ok = ok and good
    report(ok, "overtake race vs ruin formula",
           "; ".join(details) + "; z>=4 all below 1e-3")


def test_inflated_sample_claims_never_enter_blocks():
    # the direct gate first: honest timing passes, a x10 claim never does
    gate_ok = True
    for n in range(DEFAULTS.sample_count_min, DEFAULTS.sample_count_max + 1):
        honest = LocalUpdate(device_id=1, weights=np.zeros(2),
                             grad_sum=np.zeros(2), n_samples=n,
                             t_local=local_delay(n, DEFAULTS), epoch=1)
        gate_ok = gate_ok and verify_update(honest, DEFAULTS)
        gate_ok = gate_ok and not verify_update(
            replace(honest, n_samples=10 * n), DEFAULTS)

    # a single run reaches an exact fixed point after ~100 rounds (the
    # weight movement becomes literally zero), so the thousand verification
    # rounds are accumulated across fresh seeds instead
    params = replace(DEFAULTS, n_forging_devices=1, forge_inflation=10.0,
                     max_epochs=1000, convergence_eps=1e-300)
    honest_ids = list(range(2, DEFAULTS.n_devices + 1))
    rounds = forged_blocked = forged_rejected = honest_included = 0
    seed = 0
    while rounds < 1000:
        result = run_training(params, seed=seed)
        seed += 1
        for t in result.epochs:
            rounds += 1
            body = sorted(u.device_id for u in t.block.body)
            forged_blocked += 1 not in body
            forged_rejected += 1 in t.rejected_devices
            honest_included += body == honest_ids
    report(gate_ok and rounds >= 1000
           and forged_blocked == rounds == forged_rejected == honest_included,
           "sample-count inflation gate",
           f"forged update blocked in {forged_blocked}/{rounds} rounds "
           f"({seed} runs), honest nine included in {honest_included}/{rounds};"
           f" direct timing gate clean over n in "
           f"[{DEFAULTS.sample_count_min}, {DEFAULTS.sample_count_max}]")


def test_sample_gradient_matches_finite_differences():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        w = rng.standard_normal(DEFAULTS.model_dim)
        x = rng.standard_normal(DEFAULTS.model_dim)
        y = float(rng.standard_normal())
        grad = sample_gradient(w, x, y)
        fd = np.empty_like(grad)
        for k in range(w.size):
            h = 1e-6 * (1.0 + abs(w[k]))
            wp, wm = w.copy(), w.copy()
            wp[k] += h
            wm[k] -= h
            fd[k] = ((float(x @ wp) - y) ** 2 - (float(x @ wm) - y) ** 2) \
                / (4.0 * h)
        worst = max(worst, float(np.linalg.norm(fd - grad)
                                 / np.linalg.norm(grad)))
    report(worst < 1e-6,
           "sample gradient vs central differences",
           f"worst relative error {worst:.2e} over 20 points (allowed 1e-6)")
