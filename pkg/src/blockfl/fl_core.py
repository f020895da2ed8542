"""Federated linear-regression learning: data, local updates, aggregation.

The learning task is least squares on synthetic data. Each device runs a
variance-reduced local pass anchored at the shared global weights, uploads its
new weights together with its summed anchor gradient, and the next global
weights are the sample-count-weighted recombination of the local results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SystemParams


# ---- Data models ----

@dataclass(frozen=True)
class DeviceDataset:
    """One device's private samples: features (n, d) and targets (n,)."""
    device_id: int
    features: np.ndarray
    targets: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SyntheticData:
    """Per-device datasets plus a held-out test set and the generating weights."""
    devices: list
    test_features: np.ndarray
    test_targets: np.ndarray
    true_weights: np.ndarray


@dataclass(frozen=True)
class GlobalModel:
    weights: np.ndarray
    epoch: int


@dataclass(frozen=True)
class LocalUpdate:
    """What a device uploads: new weights, summed anchor gradient, and claims."""
    device_id: int
    weights: np.ndarray
    grad_sum: np.ndarray
    n_samples: int
    t_local: float
    epoch: int


# ---- Synthetic data ----

def draw_sample_counts(rng: np.random.Generator, n_devices: int,
                       low: int, high: int) -> list:
    """Per-device sample counts, uniform on the inclusive range [low, high]."""
    if low < 1 or high < low:
        raise ValueError(f"invalid sample count range [{low}, {high}]")
    return [int(v) for v in rng.integers(low, high + 1, size=n_devices)]


def generate_dataset(seed, n_devices: int, sample_counts, dim: int,
                     noise_std: float, n_test: int = 200) -> SyntheticData:
    """Draw hidden true weights and i.i.d. Gaussian features per device.

    Targets are the linear response plus N(0, noise_std^2) noise. `seed` may
    be an int, a SeedSequence, or an already-constructed Generator; device
    data, the test set, and the true weights all come from this one stream.
    """
    if n_devices < 1:
        raise ValueError(f"n_devices must be >= 1, got {n_devices}")
    if len(sample_counts) != n_devices:
        raise ValueError(f"expected {n_devices} sample counts, got {len(sample_counts)}")
    if any(n < 1 for n in sample_counts):
        raise ValueError("every device needs at least one sample")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    true_w = rng.standard_normal(dim)
    devices = []
    for i, count in enumerate(sample_counts, start=1):
        x = rng.standard_normal((count, dim))
        y = x @ true_w + noise_std * rng.standard_normal(count)
        devices.append(DeviceDataset(device_id=i, features=x, targets=y))
    test_x = rng.standard_normal((n_test, dim))
    test_y = test_x @ true_w + noise_std * rng.standard_normal(n_test)
    return SyntheticData(devices, test_x, test_y, true_w)


# ---- Loss and gradients ----

def loss(weights: np.ndarray, features: np.ndarray, targets: np.ndarray) -> float:
    """Mean of the per-sample losses (x.w - y)^2 / 2."""
    if features.shape[0] != targets.shape[0]:
        raise ValueError(f"{features.shape[0]} feature rows vs {targets.shape[0]} targets")
    if features.shape[0] == 0:
        raise ValueError("empty sample set")
    if features.shape[1] != weights.shape[0]:
        raise ValueError(f"feature dim {features.shape[1]} vs weight dim {weights.shape[0]}")
    residuals = features @ weights - targets
    return float(np.mean(residuals * residuals) / 2.0)


def sample_gradient(weights: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    """Gradient of one sample's loss: (x.w - y) x."""
    if x.shape != weights.shape:
        raise ValueError(f"sample dim {x.shape} vs weight dim {weights.shape}")
    return (float(np.dot(x, weights)) - y) * x


def _anchor_gradients(dataset: DeviceDataset, anchor_w: np.ndarray) -> np.ndarray:
    # Row k is the gradient of sample k at the anchor. Computed sample by
    # sample so the first local iteration cancels it bit-for-bit.
    n = dataset.n_samples
    grads = np.empty((n, anchor_w.shape[0]))
    for k in range(n):
        grads[k] = sample_gradient(anchor_w, dataset.features[k], float(dataset.targets[k]))
    return grads


def anchor_gradient_sum(dataset: DeviceDataset, weights: np.ndarray) -> np.ndarray:
    """Sum of the device's per-sample gradients at fixed weights.

    Matches the grad_sum a local_epoch run from the same weights reports,
    bit for bit, so callers can form the population gradient before any
    device has trained.
    """
    return _anchor_gradients(dataset, weights).sum(axis=0)


# ---- Local update and aggregation ----

def local_epoch(dataset: DeviceDataset, global_w: np.ndarray,
                global_grad: np.ndarray, step_size: float,
                params: SystemParams, epoch: int,
                rng: np.random.Generator) -> LocalUpdate:
    """One device pass: variance-reduced steps over a random permutation.

    Starting from the shared weights, each of the device's n samples is
    visited once in an rng-fixed order; the step combines the sample gradient
    at the current iterate, the same sample's gradient at the anchor, and the
    population gradient, scaled by step_size / n.
    """
    if step_size <= 0.0:
        raise ValueError(f"step_size must be > 0, got {step_size}")
    if global_w.shape != global_grad.shape:
        raise ValueError("global weights and gradient must have the same dim")
    n = dataset.n_samples
    anchor_grads = _anchor_gradients(dataset, global_w)
    scale = step_size / n
    w = global_w.copy()
    for k in rng.permutation(n):
        grad_here = sample_gradient(w, dataset.features[k], float(dataset.targets[k]))
        w = w - scale * ((grad_here - anchor_grads[k]) + global_grad)
    from .latency import local_delay  # cycle-free: latency imports params only
    return LocalUpdate(
        device_id=dataset.device_id,
        weights=w,
        grad_sum=anchor_grads.sum(axis=0),
        n_samples=n,
        t_local=local_delay(n, params),
        epoch=epoch,
    )


def global_gradient(updates) -> np.ndarray:
    """Population mean gradient from the uploaded per-device gradient sums."""
    if not updates:
        raise ValueError("no updates to average")
    ordered = sorted(updates, key=lambda u: u.device_id)
    total = ordered[0].grad_sum.copy()
    for u in ordered[1:]:
        total = total + u.grad_sum
    n_total = sum(u.n_samples for u in ordered)
    return total / n_total


def aggregate_global(prev: GlobalModel, updates) -> GlobalModel:
    """Recombine local results, each weighted by its share of the samples.

    Implemented in delta form, w + sum_i (n_i/N) (w_i - w), so that identical
    local weights reproduce the previous global weights exactly.
    """
    if not updates:
        raise ValueError("cannot aggregate an empty update set")
    ordered = sorted(updates, key=lambda u: u.device_id)
    seen = set()
    for u in ordered:
        if u.device_id in seen:
            raise ValueError(f"duplicate update from device {u.device_id}")
        seen.add(u.device_id)
        if u.weights.shape != prev.weights.shape:
            raise ValueError(f"device {u.device_id} dim {u.weights.shape} vs "
                             f"global {prev.weights.shape}")
    n_total = float(sum(u.n_samples for u in ordered))
    w = prev.weights.copy()
    for u in ordered:
        w = w + (u.n_samples / n_total) * (u.weights - prev.weights)
    return GlobalModel(weights=w, epoch=prev.epoch + 1)


def converged(prev: GlobalModel, curr: GlobalModel, eps: float) -> bool:
    """Euclidean movement of the global weights at or below eps."""
    if eps <= 0.0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return float(np.linalg.norm(curr.weights - prev.weights)) <= eps


# ---- Evaluation ----

def test_accuracy(weights: np.ndarray, features: np.ndarray,
                  targets: np.ndarray, threshold: float) -> float:
    """Fraction of test samples predicted within +-threshold of the target."""
    if threshold <= 0.0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    errors = np.abs(features @ weights - targets)
    return float(np.mean(errors <= threshold))


def test_mse(weights: np.ndarray, features: np.ndarray, targets: np.ndarray) -> float:
    residuals = features @ weights - targets
    return float(np.mean(residuals * residuals))
