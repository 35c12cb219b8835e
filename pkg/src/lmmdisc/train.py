"""Multistep residual loss, Adam training and evaluation metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .dynamics import Dataset, DivergenceError
from .lmm import LmmScheme
from .model import FixedInputKernel, Mlp, UnsupportedOrderError, _forward_cached, backward, \
    derivative_norms, derivative_norms_grad, taylor_weights

__all__ = [
    "LossError",
    "RegularizerConfig",
    "TrainConfig",
    "Metrics",
    "LmmProblem",
    "lmm_loss",
    "test_loss",
    "regularizer_penalty",
    "regularized_loss",
    "learning_rate",
    "train",
    "error_metric",
    "convergence_orders",
    "fit_normalization",
]

log = logging.getLogger(__name__)


class LossError(ValueError):
    """Scheme and data disagree, or an evaluation set is empty."""


@dataclass
class RegularizerConfig:
    r1: float = 0.5
    I: int = 1
    scale: float = 1e-3
    grid: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        if self.I > 2:
            raise UnsupportedOrderError(f"regularizer order I={self.I} > 2 is not supported")
        if self.r1 < 0 or self.scale < 0:
            raise ValueError("r1 and scale must be non-negative")
        self.grid = np.asarray(self.grid, dtype=float)


@dataclass
class TrainConfig:
    scheme: LmmScheme
    epochs: int = 10_000
    lr_start: float = 1e-2
    lr_end: float = 1e-4
    batch: int | None = None
    seed: int = 0
    log_every: int = 100
    regularizer: RegularizerConfig | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr_start >= self.lr_end > 0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be positive")


@dataclass
class Metrics:
    train_loss: float
    test_loss: float
    error_vs_target: float | None = None
    error_vs_imde: float | None = None


class LmmProblem:
    """Precomputed residual problem for one (scheme, dataset) pair.

    Windows share states, so the network is evaluated once per distinct
    state that carries a nonzero beta weight; ``B`` maps those evaluations
    onto windows.
    """

    def __init__(self, scheme: LmmScheme, data: Dataset):
        if data.M != scheme.M:
            raise LossError(f"scheme {scheme.name} has M={scheme.M}, data has M={data.M}")
        self.scheme = scheme
        self.N = data.N
        W = data.windows
        a, b = scheme.alpha, scheme.beta
        self.target = np.einsum("m,nmd->nd", a, W) / data.h
        used = np.flatnonzero(b != 0.0)
        pts = W[:, used, :].reshape(-1, data.dim)
        self.states, inverse = np.unique(pts, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        rows = np.repeat(np.arange(self.N), len(used))
        vals = np.tile(b[used], self.N)
        self.B = sparse.csr_matrix((vals, (rows, inverse)),
                                   shape=(self.N, len(self.states)))
        self.Bt = self.B.T.tocsr()
        self._kernel = None

    def residual(self, net: Mlp) -> np.ndarray:
        return self.target - self.B @ net(self.states)

    def loss(self, net: Mlp) -> float:
        r = self.residual(net)
        return float(np.mean(np.sum(r * r, axis=1)))

    def loss_and_grad(self, net: Mlp) -> tuple[float, np.ndarray]:
        if self._kernel is None:
            self._kernel = FixedInputKernel(net, self.states)
        F = self._kernel.forward(net)
        r = self.target - self.B @ F
        loss = float(np.mean(np.sum(r * r, axis=1)))
        gF = self.Bt @ r * (-2.0 / self.N)
        return loss, self._kernel.backward(net, gF)


def _window_loss_and_grad(scheme, net, windows, h):
    """Direct (non-deduplicated) loss on a subset of windows."""
    a, b = scheme.alpha, scheme.beta
    used = np.flatnonzero(b != 0.0)
    n, D = windows.shape[0], windows.shape[2]
    target = np.einsum("m,nmd->nd", a, windows) / h
    pts = windows[:, used, :].reshape(-1, D)
    F, cache = _forward_cached(net, pts)
    r = target - np.einsum("m,nmd->nd", b[used], F.reshape(n, len(used), D))
    loss = float(np.mean(np.sum(r * r, axis=1)))
    gF = (-2.0 / n) * (r[:, None, :] * b[used][None, :, None]).reshape(-1, D)
    return loss, backward(net, gF, pts, cache)


def lmm_loss(scheme: LmmScheme, net: Mlp, data: Dataset) -> float:
    """Mean over windows of ``|| sum a_m y_m / h - sum b_m f(y_m) ||_2^2``."""
    return LmmProblem(scheme, data).loss(net)


test_loss = lmm_loss


def _penalty_factor(N: int, D: int) -> float:
    return float(N) ** (-1.0 / D - 0.5)


def regularizer_penalty(reg: RegularizerConfig, net: Mlp, N: int,
                        with_grad: bool = False):
    """``N^{-1/D-1/2} * (sum_i r1^i/i! max_j ||f^{(i)}(z_j)|| + scale * max|theta|)``."""
    D = net.dims[0]
    factor = _penalty_factor(N, D)
    grad = np.zeros_like(net.params) if with_grad else None
    value = 0.0
    if reg.grid.size:
        w = taylor_weights(reg.r1, reg.I)
        if with_grad:
            v, g = derivative_norms_grad(net, reg.grid, reg.I, w)
            grad += g
        else:
            v = float(np.sum(w * derivative_norms(net, reg.grid, reg.I).max(axis=0)))
        value += v
    if reg.scale:
        i = int(np.argmax(np.abs(net.params)))
        value += reg.scale * abs(net.params[i])
        if with_grad:
            grad[i] += reg.scale * np.sign(net.params[i])
    if with_grad:
        return factor * value, factor * grad
    return factor * value


def regularized_loss(cfg: TrainConfig, net: Mlp, data: Dataset, N: int | None = None) -> float:
    base = lmm_loss(cfg.scheme, net, data)
    if cfg.regularizer is None:
        return base
    return base + regularizer_penalty(cfg.regularizer, net, data.N if N is None else N)


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Geometric interpolation from lr_start to lr_end over the epochs."""
    lo, hi = np.log10(cfg.lr_end), np.log10(cfg.lr_start)
    return float(10.0 ** (hi + (lo - hi) * epoch / cfg.epochs))


def train(cfg: TrainConfig, net: Mlp, data: Dataset, callback=None):
    """Adam on the (optionally regularized) residual loss; mutates `net`.

    Returns ``(net, history)`` with history rows ``(epoch, loss, lr)``.
    """
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    full = cfg.batch is None or cfg.batch >= data.N
    problem = LmmProblem(cfg.scheme, data) if full else None
    rng = np.random.default_rng(cfg.seed)
    m = np.zeros_like(net.params)
    v = np.zeros_like(net.params)
    step = 0
    history = []
    for epoch in range(cfg.epochs):
        lr = learning_rate(cfg, epoch)
        if full:
            batches = [None]
        else:
            perm = rng.permutation(data.N)
            batches = [perm[i:i + cfg.batch] for i in range(0, data.N, cfg.batch)]
        epoch_loss = 0.0
        for idx in batches:
            if idx is None:
                loss, grad = problem.loss_and_grad(net)
            else:
                loss, grad = _window_loss_and_grad(cfg.scheme, net, data.windows[idx], data.h)
            if cfg.regularizer is not None:
                pen, pg = regularizer_penalty(cfg.regularizer, net, data.N, with_grad=True)
                loss += pen
                grad += pg
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch} (lr={lr:.3g})")
            step += 1
            m *= beta1
            m += (1 - beta1) * grad
            v *= beta2
            v += (1 - beta2) * grad * grad
            mhat = m / (1 - beta1**step)
            vhat = v / (1 - beta2**step)
            net.params -= lr * mhat / (np.sqrt(vhat) + eps)
            epoch_loss += loss * (1 if idx is None else len(idx) / data.N)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1:
            history.append((epoch, epoch_loss, lr))
            if callback is not None:
                callback(epoch, epoch_loss, lr)
    return net, history


def fit_normalization(data: Dataset) -> dict:
    """Input shift/scale from the states and output scale from difference quotients."""
    states = data.windows.reshape(-1, data.dim)
    shift = states.mean(axis=0)
    scale = states.std(axis=0)
    scale[scale == 0] = 1.0
    dq = (data.windows[:, 1] - data.windows[:, 0]) / data.h
    out_shift = dq.mean(axis=0)
    out_scale = dq.std(axis=0)
    out_scale[out_scale == 0] = 1.0
    return {"in_shift": shift, "in_scale": scale, "out_shift": out_shift,
            "out_scale": out_scale}


def _values(g, T):
    return np.asarray(g(T) if callable(g) else g, dtype=float)


def error_metric(g1, g2, T) -> float:
    """Mean l1 distance between two fields over the points `T`.

    `g1`, `g2` are callables on ``(n, D)`` arrays or precomputed values.
    """
    T = np.asarray(T, dtype=float)
    if T.size == 0:
        raise LossError("evaluation point set is empty")
    T = np.atleast_2d(T)
    a, b = _values(g1, T), _values(g2, T)
    if a.shape != b.shape:
        raise LossError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.sum(np.abs(a - b), axis=-1)))


def convergence_orders(errors, hs) -> np.ndarray:
    """``log2(e_{i+1}/e_i)`` for step sizes that double each time."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or len(hs) < 2:
        raise LossError("need matching error and step lists of length >= 2")
    if not np.allclose(hs[1:] / hs[:-1], 2.0, rtol=1e-9, atol=0):
        raise LossError(f"step sizes must double: {hs.tolist()}")
    return np.log2(errors[1:] / errors[:-1])
