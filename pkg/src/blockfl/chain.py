"""Block structure, digests, update verification, and reward bookkeeping.

Blocks are hashed with a 64-bit FNV-1a digest over a fixed little-endian
serialization (see block_bytes for the exact layout). The digest is a chain
integrity check for the simulator, not a cryptographic commitment.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .fl_core import LocalUpdate
from .latency import local_delay
from .params import SystemParams

log = logging.getLogger(__name__)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


class ChainError(Exception):
    pass


class DigestMismatchError(ChainError):
    """Appended block does not extend the ledger tip."""


# ---- Block structure ----

@dataclass(frozen=True)
class BlockHeader:
    prev_digest: int
    block_rate: float
    pow_token: int
    height: int


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    body: tuple  # LocalUpdate entries, unique device ids
    miner_id: int
    epoch: int

    def size_bits(self, params: SystemParams) -> float:
        return params.header_size_bits + params.update_size_bits * len(self.body)


def make_genesis(block_rate: float) -> Block:
    return Block(header=BlockHeader(prev_digest=0, block_rate=block_rate,
                                    pow_token=0, height=0),
                 body=(), miner_id=0, epoch=0)


def seal_block(candidate: Block, prev_digest: int, pow_token: int,
               height: int) -> Block:
    """Attach the chain position and the winning proof-of-work token."""
    header = BlockHeader(prev_digest=prev_digest,
                         block_rate=candidate.header.block_rate,
                         pow_token=pow_token, height=height)
    return Block(header=header, body=candidate.body,
                 miner_id=candidate.miner_id, epoch=candidate.epoch)


# ---- Serialization and digest ----

def block_bytes(block: Block) -> bytes:
    """Canonical serialization, little-endian, fixed field order.

    Layout: u64 height, u64 prev_digest, f64 block_rate, u64 pow_token,
    u32 miner_id, u32 epoch, u32 update count, then per update (sorted order
    as stored): u32 device_id, u32 epoch, u32 n_samples, f64 t_local,
    u32 dim, dim * f64 weights, dim * f64 grad_sum.
    """
    parts = [struct.pack("<QQdQIII", block.header.height,
                         block.header.prev_digest & _U64,
                         block.header.block_rate,
                         block.header.pow_token & _U64,
                         block.miner_id, block.epoch, len(block.body))]
    for u in block.body:
        dim = u.weights.shape[0]
        parts.append(struct.pack("<IIIdI", u.device_id, u.epoch,
                                 u.n_samples, u.t_local, dim))
        parts.append(np.asarray(u.weights, dtype="<f8").tobytes())
        parts.append(np.asarray(u.grad_sum, dtype="<f8").tobytes())
    return b"".join(parts)


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def block_digest(block: Block) -> int:
    return fnv1a64(block_bytes(block))


# ---- Update verification ----

def verify_update(update: LocalUpdate, params: SystemParams,
                  tolerance: float = 1e-6) -> bool:
    """Cross-check the claimed sample count against the local compute time.

    The computation time scales linearly with the processed samples, so a
    claim inflated to earn extra data reward is inconsistent with the
    observed t_local. Non-finite vectors fail outright.
    """
    if update.n_samples < 1 or update.t_local < 0.0:
        return False
    if not (np.all(np.isfinite(update.weights))
            and np.all(np.isfinite(update.grad_sum))):
        return False
    expected = local_delay(update.n_samples, params)
    return abs(update.t_local - expected) <= tolerance * expected


def claim_consistent(t_local: float, n_samples: int, params: SystemParams,
                     tolerance: float = 1e-6) -> bool:
    """The timing test alone, usable before the update vectors exist."""
    if n_samples < 1 or t_local < 0.0 or not math.isfinite(t_local):
        return False
    expected = local_delay(n_samples, params)
    return abs(t_local - expected) <= tolerance * expected


# ---- Candidate blocks ----

def fill_candidate(miner_id: int, timed_updates, params: SystemParams,
                   epoch: int, prev_digest: int = 0,
                   tolerance: float = 1e-6):
    """Collect verified updates into a candidate block body.

    `timed_updates` holds (arrival_time, update) pairs. Filling stops at the
    round timer t_wait or once every device slot is taken, whichever comes
    first; unverifiable updates and duplicate device ids are rejected.
    Returns (candidate, rejected) where the candidate carries a zero
    proof-of-work token until sealed.
    """
    accepted = []
    rejected = []
    seen = set()
    ordered = sorted(timed_updates, key=lambda item: (item[0], item[1].device_id))
    for arrival, update in ordered:
        if arrival > params.t_wait_s or len(accepted) >= params.n_devices:
            log.debug("miner %d drops device %d: missed the %.3fs window "
                      "(arrival %.3fs) or block full", miner_id,
                      update.device_id, params.t_wait_s, arrival)
            rejected.append(update)
            continue
        if update.device_id in seen or not verify_update(update, params, tolerance):
            log.debug("miner %d rejects device %d: duplicate or inconsistent "
                      "claim (n=%d, t_local=%.6fs)", miner_id, update.device_id,
                      update.n_samples, update.t_local)
            rejected.append(update)
            continue
        seen.add(update.device_id)
        accepted.append(update)
    header = BlockHeader(prev_digest=prev_digest, block_rate=params.block_rate,
                         pow_token=0, height=0)
    candidate = Block(header=header, body=tuple(accepted),
                      miner_id=miner_id, epoch=epoch)
    return candidate, rejected


# ---- Ledger ----

@dataclass
class Ledger:
    """One miner's view of the chain, genesis first."""
    blocks: list = field(default_factory=list)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def tip_digest(self) -> int:
        return block_digest(self.tip)

    @property
    def height(self) -> int:
        return self.tip.header.height


def make_ledger(block_rate: float) -> Ledger:
    return Ledger(blocks=[make_genesis(block_rate)])


def append_block(ledger: Ledger, block: Block) -> Ledger:
    """Extend the chain; a stale or wrong parent digest is rejected."""
    expected = ledger.tip_digest
    if block.header.prev_digest != expected:
        raise DigestMismatchError(
            f"block at height {block.header.height} points at "
            f"{block.header.prev_digest:#x}, tip is {expected:#x}")
    if block.header.height != ledger.height + 1:
        raise DigestMismatchError(
            f"block height {block.header.height} does not extend {ledger.height}")
    ledger.blocks.append(block)
    return ledger


def verify_chain(ledger: Ledger) -> bool:
    """Walk the parent digests from genesis to tip."""
    for prev, block in zip(ledger.blocks, ledger.blocks[1:]):
        if block.header.prev_digest != block_digest(prev):
            return False
        if block.header.height != prev.header.height + 1:
            return False
    return True


# ---- Rewards ----

@dataclass
class RewardLedger:
    """Accrued data rewards per device and mining rewards per miner."""
    reward_rate: float
    data_rewards: dict = field(default_factory=dict)
    mining_rewards: dict = field(default_factory=dict)

    def total_data(self) -> float:
        return sum(self.data_rewards.values())

    def total_mining(self) -> float:
        return sum(self.mining_rewards.values())


def accrue_rewards(rewards: RewardLedger, block: Block,
                   miner_devices) -> RewardLedger:
    """Pay out one accepted block.

    Each device recorded in the block earns reward_rate per sample it
    trained on; the winning miner earns the same rate over the samples of
    its own associated devices that made it into the block. Discarded fork
    candidates never reach this function.
    """
    in_block = {u.device_id: u.n_samples for u in block.body}
    for device_id, n in in_block.items():
        rewards.data_rewards[device_id] = (
            rewards.data_rewards.get(device_id, 0.0) + rewards.reward_rate * n)
    winner_devs = miner_devices.get(block.miner_id, ())
    earned = sum(in_block.get(d, 0) for d in winner_devs)
    if earned:
        rewards.mining_rewards[block.miner_id] = (
            rewards.mining_rewards.get(block.miner_id, 0.0)
            + rewards.reward_rate * earned)
    return rewards
