"""Learning-side checks: synthetic data, the local pass, and aggregation."""

import numpy as np
import pytest

from blockfl.fl_core import (
    DeviceDataset,
    GlobalModel,
    LocalUpdate,
    aggregate_global,
    anchor_gradient_sum,
    converged,
    draw_sample_counts,
    generate_dataset,
    global_gradient,
    local_epoch,
    loss,
    sample_gradient,
)
# aliased so pytest does not collect the library functions as tests
from blockfl.fl_core import test_accuracy as accuracy_within
from blockfl.fl_core import test_mse as mse_on
from blockfl.latency import local_delay
from blockfl.params import SystemParams


def small_params(**overrides):
    base = dict(n_devices=3, n_miners=3, model_dim=4, sample_count_min=3,
                sample_count_max=8)
    base.update(overrides)
    return SystemParams(**base)


def make_update(device_id, weights, grad_sum, n, params, epoch=1):
    return LocalUpdate(device_id=device_id, weights=np.asarray(weights, float),
                       grad_sum=np.asarray(grad_sum, float), n_samples=n,
                       t_local=local_delay(n, params), epoch=epoch)


# ---- synthetic data ----

def test_draw_sample_counts_stay_in_range():
    rng = np.random.default_rng(0)
    counts = draw_sample_counts(rng, 500, 10, 50)
    assert len(counts) == 500
    assert min(counts) >= 10 and max(counts) <= 50
    assert 10 in counts and 50 in counts  # inclusive at both ends


def test_draw_sample_counts_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        draw_sample_counts(rng, 3, 0, 5)
    with pytest.raises(ValueError):
        draw_sample_counts(rng, 3, 8, 5)


def test_generate_dataset_is_deterministic():
    a = generate_dataset(123, 3, [4, 5, 6], dim=4, noise_std=0.1)
    b = generate_dataset(123, 3, [4, 5, 6], dim=4, noise_std=0.1)
    assert np.array_equal(a.true_weights, b.true_weights)
    for da, db in zip(a.devices, b.devices):
        assert np.array_equal(da.features, db.features)
        assert np.array_equal(da.targets, db.targets)
    c = generate_dataset(124, 3, [4, 5, 6], dim=4, noise_std=0.1)
    assert not np.array_equal(a.true_weights, c.true_weights)


def test_generate_dataset_shapes_and_ids():
    data = generate_dataset(7, 3, [4, 5, 6], dim=4, noise_std=0.1, n_test=31)
    assert [d.device_id for d in data.devices] == [1, 2, 3]
    assert [d.n_samples for d in data.devices] == [4, 5, 6]
    assert data.devices[1].features.shape == (5, 4)
    assert data.test_features.shape == (31, 4)
    assert data.test_targets.shape == (31,)


def test_generate_dataset_noiseless_targets_are_exact():
    data = generate_dataset(7, 2, [5, 5], dim=3, noise_std=0.0)
    for d in data.devices:
        assert np.allclose(d.targets, d.features @ data.true_weights,
                           rtol=0, atol=1e-12)


def test_generate_dataset_validation():
    with pytest.raises(ValueError):
        generate_dataset(0, 0, [], dim=3, noise_std=0.1)
    with pytest.raises(ValueError):
        generate_dataset(0, 2, [5], dim=3, noise_std=0.1)
    with pytest.raises(ValueError):
        generate_dataset(0, 2, [5, 0], dim=3, noise_std=0.1)


# ---- loss and gradients ----

def test_loss_matches_manual_mean():
    x = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    y = np.array([1.0, -2.0, 0.5])
    w = np.array([0.5, 0.25])
    manual = np.mean((x @ w - y) ** 2) / 2.0
    assert loss(w, x, y) == pytest.approx(manual, rel=1e-15)


def test_loss_validation():
    with pytest.raises(ValueError):
        loss(np.zeros(2), np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        loss(np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        loss(np.zeros(3), np.zeros((2, 2)), np.zeros(2))


def test_sample_gradient_finite_difference():
    rng = np.random.default_rng(5)
    for _ in range(5):
        w = rng.standard_normal(6)
        x = rng.standard_normal(6)
        y = float(rng.standard_normal())
        grad = sample_gradient(w, x, y)
        fd = np.empty(6)
        for k in range(6):
            h = 1e-6 * (1.0 + abs(w[k]))
            wp, wm = w.copy(), w.copy()
            wp[k] += h
            wm[k] -= h
            lp = (float(x @ wp) - y) ** 2 / 2.0
            lm = (float(x @ wm) - y) ** 2 / 2.0
            fd[k] = (lp - lm) / (2 * h)
        assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-7


def test_sample_gradient_dim_mismatch():
    with pytest.raises(ValueError):
        sample_gradient(np.zeros(3), np.zeros(4), 0.0)


def test_anchor_gradient_sum_matches_local_epoch_report():
    params = small_params()
    data = generate_dataset(3, 1, [6], dim=4, noise_std=0.1)
    ds = data.devices[0]
    w0 = np.full(4, 0.2)
    upd = local_epoch(ds, w0, np.zeros(4), 0.5, params, 1,
                      np.random.default_rng(9))
    assert np.array_equal(upd.grad_sum, anchor_gradient_sum(ds, w0))


# ---- local pass ----

def test_local_epoch_single_sample_with_zero_population_grad_is_fixed():
    # with one sample the current-iterate and anchor gradients cancel exactly
    # on the only step, so a zero population gradient moves nothing
    params = small_params()
    ds = DeviceDataset(device_id=1,
                       features=np.array([[1.0, 2.0, -1.0, 0.5]]),
                       targets=np.array([0.7]))
    w0 = np.array([0.1, -0.2, 0.3, 0.0])
    upd = local_epoch(ds, w0, np.zeros(4), 0.5, params, 1,
                      np.random.default_rng(0))
    assert np.array_equal(upd.weights, w0)


def test_local_epoch_matches_reference_loop():
    """Re-derive the pass with explicit matrix arithmetic and the same
    permutation stream; the module's sample-by-sample loop must agree."""
    params = small_params()
    data = generate_dataset(17, 1, [7], dim=4, noise_std=0.2)
    ds = data.devices[0]
    w0 = np.array([0.3, -0.1, 0.0, 0.4])
    g = np.array([0.05, -0.02, 0.01, 0.0])
    beta = 0.4

    order = np.random.default_rng(21).permutation(7)
    x, y = ds.features, ds.targets
    anchors = (x @ w0 - y)[:, None] * x
    w = w0.copy()
    for k in order:
        here = (float(x[k] @ w) - y[k]) * x[k]
        w = w - (beta / 7) * ((here - anchors[k]) + g)

    upd = local_epoch(ds, w0, g, beta, params, 1, np.random.default_rng(21))
    assert np.allclose(upd.weights, w, rtol=0, atol=1e-12)
    assert upd.n_samples == 7
    assert upd.t_local == pytest.approx(local_delay(7, params), rel=1e-12)


def test_local_epoch_validation():
    params = small_params()
    ds = generate_dataset(1, 1, [4], dim=4, noise_std=0.1).devices[0]
    with pytest.raises(ValueError):
        local_epoch(ds, np.zeros(4), np.zeros(4), 0.0, params, 1,
                    np.random.default_rng(0))
    with pytest.raises(ValueError):
        local_epoch(ds, np.zeros(4), np.zeros(3), 0.5, params, 1,
                    np.random.default_rng(0))


# ---- aggregation ----

def test_global_gradient_is_sample_weighted_mean():
    params = small_params()
    u1 = make_update(1, np.zeros(2), [2.0, 4.0], 2, params)
    u2 = make_update(2, np.zeros(2), [3.0, -1.0], 3, params)
    got = global_gradient([u2, u1])
    assert np.allclose(got, np.array([5.0, 3.0]) / 5, rtol=0, atol=1e-15)


def test_global_gradient_order_invariant():
    params = small_params()
    ups = [make_update(i, np.zeros(3), np.arange(3) * i, 4 + i, params)
           for i in (1, 2, 3)]
    assert np.array_equal(global_gradient(ups), global_gradient(ups[::-1]))
    with pytest.raises(ValueError):
        global_gradient([])


def test_aggregate_reproduces_prev_when_updates_do_not_move():
    params = small_params()
    prev = GlobalModel(weights=np.array([0.3, -0.7, 1.1]), epoch=4)
    ups = [make_update(i, prev.weights, np.zeros(3), 5, params) for i in (1, 2)]
    out = aggregate_global(prev, ups)
    assert np.array_equal(out.weights, prev.weights)  # delta form is exact
    assert out.epoch == 5


def test_aggregate_is_the_sample_weighted_mean():
    params = small_params()
    prev = GlobalModel(weights=np.zeros(2), epoch=0)
    u1 = make_update(1, [1.0, 0.0], np.zeros(2), 1, params)
    u2 = make_update(2, [0.0, 1.0], np.zeros(2), 3, params)
    out = aggregate_global(prev, [u1, u2])
    assert np.allclose(out.weights, [0.25, 0.75], rtol=0, atol=1e-15)


def test_aggregate_rejects_bad_update_sets():
    params = small_params()
    prev = GlobalModel(weights=np.zeros(2), epoch=0)
    u = make_update(1, [1.0, 0.0], np.zeros(2), 2, params)
    with pytest.raises(ValueError):
        aggregate_global(prev, [])
    with pytest.raises(ValueError):
        aggregate_global(prev, [u, u])
    bad = make_update(2, [1.0, 0.0, 0.0], np.zeros(3), 2, params)
    with pytest.raises(ValueError):
        aggregate_global(prev, [u, bad])


def test_converged_boundary():
    a = GlobalModel(weights=np.zeros(3), epoch=0)
    b = GlobalModel(weights=np.array([0.05, 0.0, 0.0]), epoch=1)
    assert converged(a, b, 0.05)
    assert not converged(a, b, 0.049)
    with pytest.raises(ValueError):
        converged(a, b, 0.0)


# ---- evaluation ----

def test_accuracy_counts_hits_within_threshold():
    x = np.eye(3)
    y = np.array([1.0, 1.0, 1.0])
    w = np.array([1.2, 0.4, 1.0])  # errors 0.2, 0.6, 0.0
    assert accuracy_within(w, x, y, 0.5) == pytest.approx(2 / 3)
    assert accuracy_within(w, x, y, 0.1) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        accuracy_within(w, x, y, 0.0)


def test_mse_matches_manual():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([2.0, -1.0])
    w = np.array([1.0, 1.0])
    assert mse_on(w, x, y) == pytest.approx((1.0 + 4.0) / 2, rel=1e-15)
