import numpy as np
import pytest

from lmmdisc.dynamics import (Dataset, DivergenceError, constant_field, damped_oscillator,
                              generate_dataset, sample_box)
from lmmdisc.lmm import LmmScheme, catalog, normalize
from lmmdisc.model import UnsupportedOrderError, mlp_new
from lmmdisc.train import (LmmProblem, LossError, RegularizerConfig, TrainConfig,
                           _window_loss_and_grad, convergence_orders, error_metric,
                           fit_normalization, learning_rate, lmm_loss, regularized_loss,
                           regularizer_penalty, train)
from lmmdisc.train import test_loss as heldout_loss

BOX = [[-2.2, 2.2], [-2.2, 2.2]]


def osc_data(M, h, n=20, seed=0):
    return generate_dataset(damped_oscillator(), sample_box(BOX, n, seed), M, h)


def const_net(c, dims=(2, 4, 2)):
    net = mlp_new(dims, 0)
    net.params[:] = 0.0
    net.biases[-1][:] = c
    return net


def test_constant_field_zero_loss():
    c = [1.0, -2.0]
    f = constant_field(c)
    for name in ("AB1", "AB2", "BDF3", "AM2"):
        s = catalog(name)
        ds = generate_dataset(f, sample_box([[-1, 1]] * 2, 3, 0), s.M, 0.1)
        assert lmm_loss(s, const_net(c), ds) < 1e-25
        assert heldout_loss(s, const_net(c), ds) == lmm_loss(s, const_net(c), ds)


def test_single_window_ab1_formula():
    net = mlp_new((2, 5, 2), 1)
    w = np.array([[[0.3, -0.1], [0.35, -0.2]]])
    ds = Dataset(w, 0.05)
    expect = np.sum(((w[0, 1] - w[0, 0]) / 0.05 - net(w[0, 0])) ** 2)
    assert lmm_loss(catalog("AB1"), net, ds) == pytest.approx(expect, rel=1e-14)


def test_mismatched_M():
    with pytest.raises(LossError):
        lmm_loss(catalog("AB2"), mlp_new((2, 3, 2), 0), osc_data(1, 0.01, 2))


def test_exact_field_loss_scales_like_h_to_2p():
    f = damped_oscillator()
    s = catalog("AB2")
    pts = sample_box([[-1, 1]] * 2, 10, 2)
    hs = np.array([0.02, 0.01, 0.005])
    losses = [lmm_loss(s, f, generate_dataset(f, pts, 2, h, n_steps=4)) for h in hs]
    slope = np.polyfit(np.log2(hs), np.log2(losses), 1)[0]
    assert abs(slope - 4) < 0.4


def test_loss_invariant_under_scheme_rescaling():
    ds = osc_data(2, 0.02, 5)
    net = mlp_new((2, 6, 2), 3)
    s = catalog("BDF2")
    raw = LmmScheme("BDF2x3", tuple(3 * np.array(s.alphas)), tuple(3 * np.array(s.betas)))
    assert lmm_loss(normalize(raw), net, ds) == pytest.approx(lmm_loss(s, net, ds), rel=1e-13)


def test_deduplicated_loss_matches_direct_windows():
    ds = osc_data(2, 0.02, 6)
    net = mlp_new((2, 8, 2), 4)
    for name in ("AB2", "BDF2", "AM2"):
        s = catalog(name)
        loss, grad = LmmProblem(s, ds).loss_and_grad(net)
        l2, g2 = _window_loss_and_grad(s, net, ds.windows, ds.h)
        assert loss == pytest.approx(l2, rel=1e-13)
        np.testing.assert_allclose(grad, g2, rtol=1e-10, atol=1e-12)


def test_loss_gradient_finite_differences():
    ds = osc_data(1, 0.02, 3)
    net = mlp_new((2, 5, 2), 0, **fit_normalization(ds))
    prob = LmmProblem(catalog("AM1"), ds)
    _, grad = prob.loss_and_grad(net)
    eps = 1e-6
    for i in np.random.default_rng(0).choice(net.n_params, 10, replace=False):
        old = net.params[i]
        net.params[i] = old + eps
        lp = prob.loss(net)
        net.params[i] = old - eps
        lm = prob.loss(net)
        net.params[i] = old
        assert abs((lp - lm) / (2 * eps) - grad[i]) < 1e-5 * max(1.0, abs(grad[i]))


def test_regularizer_off_equals_loss():
    ds = osc_data(1, 0.02, 4)
    net = mlp_new((2, 5, 2), 0)
    cfg = TrainConfig(catalog("AB1"), regularizer=RegularizerConfig(scale=0.0))
    assert regularized_loss(cfg, net, ds) == lmm_loss(catalog("AB1"), net, ds)


def test_regularizer_zero_net_penalty():
    net = const_net([0.5, -1.5])
    reg = RegularizerConfig(r1=1.0, I=0, scale=0.0, grid=np.zeros((1, 2)))
    N = 40
    assert regularizer_penalty(reg, net, N) == pytest.approx(N ** (-1 / 2 - 1 / 2) * 2.0)


def test_regularizer_monotone_in_r1_and_nonnegative():
    net = mlp_new((2, 6, 6, 2), 5)
    grid = np.random.default_rng(0).uniform(-1, 1, (9, 2))
    vals = [regularizer_penalty(RegularizerConfig(r1=r, I=2, grid=grid), net, 100)
            for r in (0.0, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    ds = osc_data(1, 0.02, 4)
    cfg = TrainConfig(catalog("AB1"), regularizer=RegularizerConfig(r1=0.5, I=1, grid=grid))
    assert regularized_loss(cfg, net, ds) >= lmm_loss(catalog("AB1"), net, ds)


def test_regularizer_gradient():
    net = mlp_new((2, 5, 5, 2), 2)
    grid = np.random.default_rng(1).uniform(-1, 1, (4, 2))
    reg = RegularizerConfig(r1=0.8, I=2, scale=1e-2, grid=grid)
    _, g = regularizer_penalty(reg, net, 50, with_grad=True)
    eps = 1e-6
    for i in range(0, net.n_params, 7):
        old = net.params[i]
        net.params[i] = old + eps
        lp = regularizer_penalty(reg, net, 50)
        net.params[i] = old - eps
        lm = regularizer_penalty(reg, net, 50)
        net.params[i] = old
        assert abs((lp - lm) / (2 * eps) - g[i]) < 1e-6


def test_regularizer_order_cap():
    with pytest.raises(UnsupportedOrderError):
        RegularizerConfig(I=3)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(catalog("AB1"), epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(catalog("AB1"), lr_start=1e-4, lr_end=1e-2)


def test_learning_rate_schedule():
    cfg = TrainConfig(catalog("AB1"), epochs=1000)
    assert learning_rate(cfg, 0) == pytest.approx(1e-2)
    assert learning_rate(cfg, 500) == pytest.approx(1e-3)
    assert learning_rate(cfg, 250) == pytest.approx(10 ** -2.5)
    assert learning_rate(cfg, 1000) == pytest.approx(1e-4)


def test_train_constant_field_to_machine_precision():
    f = constant_field([1.0, -2.0])
    ds = generate_dataset(f, sample_box([[-1, 1]] * 2, 3, 0), 1, 0.1)
    net = mlp_new((2, 4, 2), 0, **fit_normalization(ds))
    net, hist = train(TrainConfig(catalog("AB1"), epochs=2000), net, ds)
    assert hist[-1][1] < 1e-10


def test_train_is_deterministic():
    ds = osc_data(1, 0.02, 10)
    runs = []
    for _ in range(2):
        net = mlp_new((2, 8, 8, 2), 7, **fit_normalization(ds))
        _, hist = train(TrainConfig(catalog("BDF1"), epochs=200, log_every=10), net, ds)
        runs.append((net.params.copy(), hist))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_train_smoothed_history_non_increasing():
    ds = osc_data(1, 0.016, 30)
    net = mlp_new((2, 16, 16, 2), 0, **fit_normalization(ds))
    _, hist = train(TrainConfig(catalog("AB1"), epochs=2000, log_every=1), net, ds)
    loss = np.array([h[1] for h in hist])
    smooth = loss[: len(loss) // 100 * 100].reshape(-1, 100).mean(axis=1)
    assert np.all(np.diff(smooth) <= 0)
    assert smooth[-1] < 0.05 * smooth[0]


def test_minibatch_training_runs_and_logs():
    ds = osc_data(1, 0.02, 10)
    net = mlp_new((2, 8, 2), 0, **fit_normalization(ds))
    seen = []
    _, hist = train(TrainConfig(catalog("AB1"), epochs=50, batch=32, log_every=10), net, ds,
                    callback=lambda e, l, lr: seen.append(e))
    assert seen == [0, 10, 20, 30, 40, 49]
    assert [h[0] for h in hist] == seen


def test_train_with_regularizer_reduces_loss():
    ds = osc_data(1, 0.02, 10)
    net = mlp_new((2, 8, 2), 0, **fit_normalization(ds))
    reg = RegularizerConfig(r1=0.5, I=1, grid=sample_box(BOX, 9, 1))
    _, hist = train(TrainConfig(catalog("AB1"), epochs=300, regularizer=reg), net, ds)
    assert hist[-1][1] < hist[0][1]


def test_nonfinite_loss_aborts():
    ds = osc_data(1, 0.02, 2)
    ds.windows[0, 1, 0] = np.nan
    with pytest.raises(DivergenceError):
        train(TrainConfig(catalog("AB1"), epochs=5), mlp_new((2, 4, 2), 0), ds)


def test_error_metric_examples():
    T = np.random.default_rng(0).normal(size=(10, 2))
    f = damped_oscillator()
    assert error_metric(f, f, T) == 0.0
    shifted = lambda x: f(x) + np.array([1.0, 0.0])
    assert error_metric(shifted, f, T) == pytest.approx(1.0)
    with pytest.raises(LossError):
        error_metric(f, f, np.zeros((0, 2)))
    with pytest.raises(LossError):
        error_metric(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros((3, 2)))


def test_convergence_orders():
    np.testing.assert_allclose(convergence_orders([1.0, 2.0, 4.0], [0.1, 0.2, 0.4]), [1.0, 1.0])
    np.testing.assert_allclose(convergence_orders([1.0, 8.0], [0.1, 0.2]), [3.0])
    # paper anchor: AB M=1 on Lorenz, 1.709e-1 at h=0.002 and 3.418e-1 at h=0.004
    assert convergence_orders([1.709e-1, 3.418e-1], [0.002, 0.004])[0] == pytest.approx(1.0,
                                                                                          abs=1e-3)
    with pytest.raises(LossError):
        convergence_orders([1.0, 2.0], [0.1, 0.3])
