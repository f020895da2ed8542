"""System parameters shared by the learning, chain, and latency models."""

from __future__ import annotations

from dataclasses import dataclass, fields

WINNER_DELAY_MODES = ("max", "single_link")


def db_to_linear(value_db: float) -> float:
    """Convert a decibel power ratio to a linear one (10 dB -> 10.0)."""
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Every scalar knob of a run, in SI units (bits, Hz, seconds, linear SNR).

    Defaults describe a 10-device / 10-miner network on narrowband 300 kHz
    links at 10 dB SNR, 100 kbit data samples, 5 kbit model updates, and a
    200 kbit block header.
    """

    n_devices: int = 10
    n_miners: int = 10

    # payload sizes
    sample_size_bits: float = 100e3
    update_size_bits: float = 5e3
    header_size_bits: float = 200e3

    # device CPU and radio links
    clock_hz: float = 1e9
    uplink_bw_hz: float = 300e3
    downlink_bw_hz: float = 300e3
    miner_bw_hz: float = 300e3
    snr_uplink: float = 10.0
    snr_downlink: float = 10.0
    snr_miner: float = 10.0

    # protocol timers and proof-of-work
    t_wait_s: float = 0.05
    t_ack_wait_s: float = 0.5
    block_rate: float = 0.3  # per-miner block generation rate, 1/s

    # learning
    step_size: float = 0.5
    convergence_eps: float = 0.05
    model_dim: int = 10
    data_noise_std: float = 0.1
    sample_count_min: int = 10
    sample_count_max: int = 50
    accuracy_threshold: float = 0.5
    max_epochs: int = 100

    # miner energy and malfunction model
    energy_threshold: float = 0.0
    malfunction_enabled: bool = False
    malfunction_prob: float = 0.05
    malfunction_noise_mean: float = -0.1
    malfunction_noise_var: float = 0.01

    # incentives and the sample-count inflation attack
    reward_rate: float = 1.0
    n_forging_devices: int = 0
    forge_inflation: float = 10.0

    # interpretation switch for the winner's propagation delay in the
    # closed-form optimal rate: "max" floors it by the ACK timer, matching the
    # realized-latency accounting; "single_link" uses the raw link delay.
    winner_delay_mode: str = "max"

    # when miners are the devices themselves, a device never picks itself
    miners_are_devices: bool = False

    # keep the epoch-1 device->miner association for the whole run instead of
    # redrawing it every epoch
    sticky_association: bool = False

    def validation_errors(self) -> list[str]:
        """Collect every constraint violation instead of stopping at the first."""
        errs = []
        if self.n_devices < 1:
            errs.append(f"n_devices must be >= 1, got {self.n_devices}")
        if self.n_miners < 1:
            errs.append(f"n_miners must be >= 1, got {self.n_miners}")
        for name in ("sample_size_bits", "update_size_bits", "header_size_bits",
                     "clock_hz", "uplink_bw_hz", "downlink_bw_hz", "miner_bw_hz",
                     "t_wait_s", "t_ack_wait_s", "block_rate", "step_size",
                     "convergence_eps", "reward_rate", "forge_inflation"):
            value = getattr(self, name)
            limit_ok = value > 0.0 if name not in ("t_wait_s", "reward_rate") else value >= 0.0
            if not limit_ok:
                kind = ">= 0" if name in ("t_wait_s", "reward_rate") else "> 0"
                errs.append(f"{name} must be {kind}, got {value}")
        for name in ("snr_uplink", "snr_downlink", "snr_miner"):
            if getattr(self, name) < 0.0:
                errs.append(f"{name} must be >= 0 (linear), got {getattr(self, name)}")
        if not 0.0 <= self.energy_threshold <= 1.0:
            errs.append(f"energy_threshold must lie in [0, 1], got {self.energy_threshold}")
        if not 0.0 <= self.malfunction_prob <= 1.0:
            errs.append(f"malfunction_prob must lie in [0, 1], got {self.malfunction_prob}")
        if self.malfunction_noise_var < 0.0:
            errs.append(f"malfunction_noise_var must be >= 0, got {self.malfunction_noise_var}")
        if self.model_dim < 1:
            errs.append(f"model_dim must be >= 1, got {self.model_dim}")
        if self.data_noise_std < 0.0:
            errs.append(f"data_noise_std must be >= 0, got {self.data_noise_std}")
        if self.sample_count_min < 1:
            errs.append(f"sample_count_min must be >= 1, got {self.sample_count_min}")
        if self.sample_count_max < self.sample_count_min:
            errs.append("sample_count_max must be >= sample_count_min, got "
                        f"[{self.sample_count_min}, {self.sample_count_max}]")
        if self.accuracy_threshold <= 0.0:
            errs.append(f"accuracy_threshold must be > 0, got {self.accuracy_threshold}")
        if self.max_epochs < 1:
            errs.append(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0 <= self.n_forging_devices <= self.n_devices:
            errs.append("n_forging_devices must lie in [0, n_devices], got "
                        f"{self.n_forging_devices}")
        if self.winner_delay_mode not in WINNER_DELAY_MODES:
            errs.append(f"winner_delay_mode must be one of {WINNER_DELAY_MODES}, "
                        f"got {self.winner_delay_mode!r}")
        if self.miners_are_devices and self.n_miners != self.n_devices:
            errs.append("miners_are_devices requires n_miners == n_devices, got "
                        f"{self.n_miners} != {self.n_devices}")
        return errs

    def validate(self) -> "SystemParams":
        errs = self.validation_errors()
        if errs:
            raise ValueError("invalid parameters: " + "; ".join(errs))
        return self


PARAM_FIELD_NAMES = tuple(f.name for f in fields(SystemParams))
