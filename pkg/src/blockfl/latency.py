"""Delay formulas for one training round and the optimal block-generation rate.

All delays are in seconds. Links carry `bits / (bandwidth * log2(1 + SNR))`
transfer delays; local computation is `bits_per_sample * n / clock`; mining is
a memoryless race, so the winner among n miners finishes in Exp(n * rate) time
and a losing miner forks the round whenever it finishes within the one-link
propagation window behind the winner.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .params import SystemParams

log = logging.getLogger(__name__)


# ---- Link and processing delays ----

def shannon_rate(bandwidth_hz: float, snr_linear: float) -> float:
    """Achievable bit rate of a link, bandwidth * log2(1 + SNR)."""
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_hz}")
    if snr_linear < 0.0:
        raise ValueError(f"SNR must be >= 0, got {snr_linear}")
    return bandwidth_hz * math.log2(1.0 + snr_linear)


def local_delay(n_samples: int, params: SystemParams) -> float:
    """Device computation time for one local pass over n samples."""
    if n_samples < 0:
        raise ValueError(f"n_samples must be >= 0, got {n_samples}")
    return params.sample_size_bits * n_samples / params.clock_hz


def global_delay(params: SystemParams) -> float:
    """Device-side time to recombine the downloaded per-device updates."""
    return params.update_size_bits * params.n_devices / params.clock_hz


def uplink_delay(params: SystemParams) -> float:
    """One model update, device to its miner."""
    return params.update_size_bits / shannon_rate(params.uplink_bw_hz, params.snr_uplink)


def block_size_bits(params: SystemParams) -> float:
    """Header plus one update slot per device."""
    return params.header_size_bits + params.update_size_bits * params.n_devices


def downlink_delay(params: SystemParams) -> float:
    """Full block, miner to device."""
    return block_size_bits(params) / shannon_rate(params.downlink_bw_hz, params.snr_downlink)


def cross_verification_delay(t_local: float, t_up: float, params: SystemParams,
                             miner_loads) -> float:
    """Time from a device's upload until its miner can start mining.

    The miner waits out the remainder of the round timer t_wait, or the
    miner-to-miner exchange of the other miners' verified updates, whichever
    is longer. `miner_loads` holds the update counts of the *other* miners.
    """
    if any(n < 0 for n in miner_loads):
        raise ValueError("miner loads must be >= 0")
    rate = shannon_rate(params.miner_bw_hz, params.snr_miner)
    exchange = params.update_size_bits * sum(miner_loads) / rate
    return max(params.t_wait_s - (t_local + t_up), exchange)


def link_propagation_delay(params: SystemParams) -> float:
    """One generated block across one miner-to-miner link."""
    return block_size_bits(params) / shannon_rate(params.miner_bw_hz, params.snr_miner)


def block_propagation_delay(params: SystemParams, n_active: int | None = None) -> float:
    """The winner's propagation wait: slowest link, floored by the ACK timer.

    A single miner has nobody to reach, so the wait is zero.
    """
    n = params.n_miners if n_active is None else n_active
    if n <= 1:
        return 0.0
    return max(link_propagation_delay(params), params.t_ack_wait_s)


def sum_link_delays(params: SystemParams, n_active: int | None = None) -> float:
    """Total of the winner's per-link propagation delays (the fork exposure)."""
    n = params.n_miners if n_active is None else n_active
    return (n - 1) * link_propagation_delay(params)


# ---- Mining race ----

def sample_mining_time(rng, block_rate: float) -> float:
    """One miner's time to a proof-of-work success, Exp(block_rate)."""
    if block_rate <= 0.0:
        raise ValueError(f"block_rate must be > 0, got {block_rate}")
    return float(rng.exponential(1.0 / block_rate))


def winner_expected_delay(block_rate: float, n_miners: int) -> float:
    """Mean time until the first of n_miners memoryless miners succeeds."""
    if block_rate <= 0.0 or n_miners < 1:
        raise ValueError(f"need block_rate > 0 and n_miners >= 1, got "
                         f"{block_rate}, {n_miners}")
    return 1.0 / (block_rate * n_miners)


def fork_probability_analytic(block_rate: float, propagation_delays) -> float:
    """Chance that some losing miner finishes inside its propagation window.

    By memorylessness each loser's margin behind the winner is Exp(block_rate),
    so the no-fork probability factorizes and the fork probability is
    1 - exp(-block_rate * sum of the windows).
    """
    if block_rate < 0.0:
        raise ValueError(f"block_rate must be >= 0, got {block_rate}")
    delays = list(propagation_delays)
    if any(d < 0.0 for d in delays):
        raise ValueError("propagation delays must be >= 0")
    return 1.0 - math.exp(-block_rate * sum(delays))


# ---- Round latency ----

def epoch_latency_realized(t_local: float, t_up: float, t_cross: float,
                           t_bg: float, t_bp: float, t_dn: float,
                           t_global: float, n_fork: int) -> float:
    """Observed round latency: the first five stages repeat once per attempt."""
    if n_fork < 1:
        raise ValueError(f"n_fork counts attempts and must be >= 1, got {n_fork}")
    return n_fork * (t_local + t_up + t_cross + t_bg + t_bp) + t_dn + t_global


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-stage delays of one round for the observed device.

    t_bg is the winner's mining time averaged over the round's attempts, so
    `total` is exactly the attempt-by-attempt sum.
    """
    t_local: float
    t_up: float
    t_cross: float
    t_bg: float
    t_bp: float
    t_dn: float
    t_global: float
    n_fork: int
    total: float


def make_breakdown(t_local, t_up, t_cross, t_bg, t_bp, t_dn, t_global,
                   n_fork) -> LatencyBreakdown:
    total = epoch_latency_realized(t_local, t_up, t_cross, t_bg, t_bp,
                                   t_dn, t_global, n_fork)
    return LatencyBreakdown(t_local, t_up, t_cross, t_bg, t_bp, t_dn,
                            t_global, n_fork, total)


def expected_epoch_latency(params: SystemParams, block_rate: float | None = None,
                           n_active: int | None = None) -> float:
    """Mean round latency under the synchronized-start approximation.

    Every attempt costs the round timer, the winner's mining time
    (mean 1/(rate*n)), and the winner's propagation wait; the expected number
    of attempts is the inverse no-fork probability, exp(rate * total link
    exposure). Download and recombination happen once.
    """
    rate = params.block_rate if block_rate is None else block_rate
    if rate <= 0.0:
        raise ValueError(f"block_rate must be > 0, got {rate}")
    n = params.n_miners if n_active is None else n_active
    if n < 1:
        raise ValueError(f"need at least one miner, got {n}")
    per_attempt = (params.t_wait_s + block_propagation_delay(params, n)
                   + 1.0 / (rate * n))
    retry_factor = math.exp(rate * sum_link_delays(params, n))
    return per_attempt * retry_factor + downlink_delay(params) + global_delay(params)


# ---- Optimal block-generation rate ----

def optimal_lambda_closed_form(t_bp_winner: float, t_wait: float, n_miners: int,
                               sum_links: float | None = None) -> float:
    """Closed-form minimizer of the expected round latency.

    Minimizes (t_wait + t_bp + 1/(rate*n)) * exp(rate * S) over the rate,
    where S defaults to t_bp_winner itself (the single-delay collapse, which
    yields 2 / (t_bp * (1 + sqrt(1 + 4n(1 + t_wait/t_bp))))).
    """
    if t_bp_winner <= 0.0:
        raise ValueError(f"t_bp_winner must be > 0, got {t_bp_winner}")
    if t_wait < 0.0:
        raise ValueError(f"t_wait must be >= 0, got {t_wait}")
    if n_miners < 1:
        raise ValueError(f"n_miners must be >= 1, got {n_miners}")
    s = t_bp_winner if sum_links is None else sum_links
    if s <= 0.0:
        raise ValueError(f"total link delay must be > 0, got {s}")
    root = math.sqrt(1.0 + 4.0 * n_miners * (t_wait + t_bp_winner) / s)
    return 2.0 / (s * (1.0 + root))


def _golden_section_min(f, lo: float, hi: float, tol: float = 1e-10,
                        max_iter: int = 200) -> float:
    """Argmin of a unimodal f on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def numeric_optimal_lambda(params: SystemParams, lo: float = 1e-4,
                           hi: float = 1e3) -> float:
    """Numeric argmin of expected_epoch_latency, searched on a log rate axis.

    Serves as the independent check on the closed form. With a single miner
    the latency is monotone decreasing, so the search lands at the upper
    bound; callers treat that as the degenerate no-fork case.
    """
    def objective(log_rate: float) -> float:
        try:
            return expected_epoch_latency(params, block_rate=math.exp(log_rate))
        except OverflowError:
            return math.inf
    return math.exp(_golden_section_min(objective, math.log(lo), math.log(hi)))


def optimal_lambda(params: SystemParams) -> float:
    """Latency-optimal block-generation rate for the given network.

    Uses the closed form with the fork exposure kept as the full sum of link
    delays; the bracket constant uses the winner's propagation wait under the
    configured reading. Degenerate networks without propagation fall back to
    the numeric minimizer.
    """
    s = sum_link_delays(params)
    if params.winner_delay_mode == "single_link":
        t_bp = link_propagation_delay(params) if params.n_miners > 1 else 0.0
    else:
        t_bp = block_propagation_delay(params)
    if s <= 0.0 or t_bp <= 0.0:
        log.warning("no block propagation (n_miners=%d): falling back to the "
                    "numeric rate search", params.n_miners)
        return numeric_optimal_lambda(params)
    return optimal_lambda_closed_form(t_bp, params.t_wait_s, params.n_miners,
                                      sum_links=s)
