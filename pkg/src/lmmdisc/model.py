"""Tanh feedforward networks with hand-written reverse-mode gradients.

The network is

    u(z) = W_{L+1} tanh(... tanh(W_1 z + b_1) ...) + b_{L+1}

wrapped in optional affine input/output scaling,

    f(x) = out_scale * u((x - in_shift) / in_scale) + out_shift,

so that systems with large state ranges (Lorenz) train without rescaling
the data by hand. All parameters live in one flat float64 vector; the
per-layer ``weights`` and ``biases`` are views into it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path

import numpy as np

from .jets import VectorField

__all__ = [
    "Mlp",
    "UnsupportedOrderError",
    "mlp_new",
    "forward",
    "backward",
    "derivative_norms",
    "derivative_tensors",
    "derivative_norms_grad",
    "taylor_weights",
]


class UnsupportedOrderError(ValueError):
    pass


def _layout(dims):
    shapes, offset = [], 0
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        shapes.append((offset, d_out, d_in))
        offset += d_out * d_in + d_out
    return shapes, offset


@dataclass
class Mlp:
    dims: tuple[int, ...]
    params: np.ndarray
    seed: int | None = None
    in_shift: np.ndarray = None
    in_scale: np.ndarray = None
    out_shift: np.ndarray = None
    out_scale: np.ndarray = None
    weights: list = field(init=False, repr=False)
    biases: list = field(init=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ValueError(f"layer widths must be positive, got {self.dims}")
        shapes, n = _layout(self.dims)
        self.params = np.ascontiguousarray(self.params, dtype=float)
        if self.params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {self.params.shape}")
        d_in, d_out = self.dims[0], self.dims[-1]
        self.in_shift = _vec(self.in_shift, d_in, 0.0)
        self.in_scale = _vec(self.in_scale, d_in, 1.0)
        self.out_shift = _vec(self.out_shift, d_out, 0.0)
        self.out_scale = _vec(self.out_scale, d_out, 1.0)
        self.weights, self.biases = [], []
        for off, r, c in shapes:
            self.weights.append(self.params[off:off + r * c].reshape(r, c))
            self.biases.append(self.params[off + r * c:off + r * c + r])

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def n_hidden(self) -> int:
        return len(self.dims) - 2

    def copy(self) -> "Mlp":
        return Mlp(self.dims, self.params.copy(), self.seed, self.in_shift.copy(),
                   self.in_scale.copy(), self.out_shift.copy(), self.out_scale.copy())

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)

    def as_field(self) -> VectorField:
        return VectorField(self.dims[0], name="mlp", array_func=self.__call__)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "seed": self.seed,
            "normalization": {
                "in_shift": self.in_shift.tolist(),
                "in_scale": self.in_scale.tolist(),
                "out_shift": self.out_shift.tolist(),
                "out_scale": self.out_scale.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        parts = []
        for w, b in zip(d["weights"], d["biases"]):
            parts += [np.asarray(w, dtype=float).ravel(), np.asarray(b, dtype=float)]
        norm = d.get("normalization", {})
        return cls(tuple(d["dims"]), np.concatenate(parts), d.get("seed"),
                   norm.get("in_shift"), norm.get("in_scale"),
                   norm.get("out_shift"), norm.get("out_scale"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _vec(v, n, default):
    if v is None:
        return np.full(n, default)
    v = np.array(v, dtype=float).reshape(-1)
    if v.size == 1:
        v = np.full(n, v[0])
    if v.shape != (n,):
        raise ValueError(f"normalization vector must have length {n}")
    return v


def mlp_new(dims, seed: int = 0, **normalization) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, per layer."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"layer widths must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    parts = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / d_in)
        parts.append(rng.uniform(-bound, bound, d_out * d_in))
        parts.append(rng.uniform(-bound, bound, d_out))
    return Mlp(dims, np.concatenate(parts), seed, **normalization)


def _forward_cached(net: Mlp, x: np.ndarray):
    z = (x - net.in_shift) / net.in_scale
    acts = [z]
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        z = np.tanh(z @ W.T + b)
        acts.append(z)
    u = z @ net.weights[-1].T + net.biases[-1]
    return u * net.out_scale + net.out_shift, acts


def forward(net: Mlp, x) -> np.ndarray:
    """Evaluate on a point ``(D,)`` or a batch ``(n, D)``."""
    x = np.asarray(x, dtype=float)
    return _forward_cached(net, x)[0]


def backward(net: Mlp, grad_out, x, cache=None) -> np.ndarray:
    """Gradient of ``sum(grad_out * f(x))`` with respect to the flat parameters.

    `cache` is the activation list from a previous forward pass on `x`.
    """
    x = np.asarray(x, dtype=float)
    if cache is None:
        cache = _forward_cached(net, x)[1]
    g = np.asarray(grad_out, dtype=float) * net.out_scale
    if g.ndim == 1:
        g = g[None]
        cache = [a[None] if a.ndim == 1 else a for a in cache]
    grad = np.empty_like(net.params)
    gw, gb = _grad_views(net, grad)
    for l in range(len(net.weights) - 1, -1, -1):
        a = cache[l]
        gw[l][...] = g.T @ a
        gb[l][...] = g.sum(axis=0)
        if l:
            g = (g @ net.weights[l]) * (1.0 - a * a)
    return grad


class FixedInputKernel:
    """Forward/backward on a fixed input batch with preallocated buffers.

    Training evaluates the same states every epoch; reusing the activation
    buffers avoids re-allocating several MB per step.
    """

    def __init__(self, net: Mlp, x):
        x = np.asarray(x, dtype=float)
        self.z0 = (x - net.in_shift) / net.in_scale
        n = len(x)
        self.acts = [self.z0] + [np.empty((n, d)) for d in net.dims[1:-1]]
        self.out = np.empty((n, net.dims[-1]))
        self.gbuf = [np.empty((n, d)) for d in net.dims[1:-1]]
        self.tmp = [np.empty((n, d)) for d in net.dims[1:-1]]

    def forward(self, net: Mlp) -> np.ndarray:
        for l, (W, b) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
            a = self.acts[l + 1]
            np.matmul(self.acts[l], W.T, out=a)
            a += b
            np.tanh(a, out=a)
        np.matmul(self.acts[-1], net.weights[-1].T, out=self.out)
        self.out += net.biases[-1]
        self.out *= net.out_scale
        self.out += net.out_shift
        return self.out

    def backward(self, net: Mlp, grad_out: np.ndarray) -> np.ndarray:
        grad = np.empty_like(net.params)
        gw, gb = _grad_views(net, grad)
        g = grad_out * net.out_scale
        for l in range(len(net.weights) - 1, -1, -1):
            a = self.acts[l]
            np.matmul(g.T, a, out=gw[l])
            g.sum(axis=0, out=gb[l])
            if l:
                gn, t = self.gbuf[l - 1], self.tmp[l - 1]
                np.matmul(g, net.weights[l], out=gn)
                np.multiply(a, a, out=t)
                np.subtract(1.0, t, out=t)
                gn *= t
                g = gn
        return grad


def _grad_views(net: Mlp, grad: np.ndarray):
    tmp = Mlp(net.dims, grad)
    return tmp.weights, tmp.biases


def _pairs(d):
    return [(j, k) for j in range(d) for k in range(j, d)]


def _taylor_forward(net: Mlp, z: np.ndarray, order: int):
    """Value, first and mixed second directional derivatives of the raw
    network ``u`` along the input axes (in normalized coordinates).

    Shapes: value ``(n, d)``, first ``(n, D, d)``, second ``(n, P, d)`` with
    P the number of index pairs j <= k.
    """
    n, D = z.shape
    pairs = _pairs(D)
    jj = np.array([p[0] for p in pairs], dtype=int)
    kk = np.array([p[1] for p in pairs], dtype=int)
    v = z
    t1 = np.broadcast_to(np.eye(D), (n, D, D)) if order >= 1 else None
    t2 = np.zeros((n, len(pairs), D)) if order >= 2 else None
    cache = []
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        a = v @ W.T + b
        a1 = t1 @ W.T if order >= 1 else None
        a2 = t2 @ W.T if order >= 2 else None
        s = np.tanh(a)
        g = 1.0 - s * s
        cache.append((v, t1, t2, s, g, a1, a2))
        v = s
        if order >= 1:
            t1 = g[:, None, :] * a1
        if order >= 2:
            gp = -2.0 * s * g
            t2 = g[:, None, :] * a2 + gp[:, None, :] * a1[:, jj, :] * a1[:, kk, :]
    W, b = net.weights[-1], net.biases[-1]
    cache.append((v, t1, t2))
    out = [v @ W.T + b]
    if order >= 1:
        out.append(t1 @ W.T)
    if order >= 2:
        out.append(t2 @ W.T)
    return out, cache, (jj, kk)


def _taylor_backward(net: Mlp, cache, pairs, cot, order: int) -> np.ndarray:
    """Reverse pass through :func:`_taylor_forward` for cotangents `cot`."""
    jj, kk = pairs
    grad = np.zeros_like(net.params)
    gw, gb = _grad_views(net, grad)
    L = len(net.weights) - 1
    v, t1, t2 = cache[L]
    c0 = cot[0]
    c1 = cot[1] if order >= 1 else None
    c2 = cot[2] if order >= 2 else None
    W = net.weights[L]
    gw[L][...] = c0.T @ v
    gb[L][...] = c0.sum(axis=0)
    if order >= 1:
        gw[L][...] += np.einsum("nji,njk->ik", c1, t1)
    if order >= 2:
        gw[L][...] += np.einsum("npi,npk->ik", c2, t2)
    v_bar = c0 @ W
    t1_bar = c1 @ W if order >= 1 else None
    t2_bar = c2 @ W if order >= 2 else None
    for l in range(L - 1, -1, -1):
        v_prev, t1_prev, t2_prev, s, g, a1, a2 = cache[l]
        s_bar = v_bar
        g_bar = np.zeros_like(g)
        a1_bar = None
        a2_bar = None
        if order >= 1:
            a1_bar = g[:, None, :] * t1_bar
            g_bar += np.einsum("nji,nji->ni", t1_bar, a1)
        if order >= 2:
            gp = -2.0 * s * g
            a2_bar = g[:, None, :] * t2_bar
            g_bar += np.einsum("npi,npi->ni", t2_bar, a2)
            prod = a1[:, jj, :] * a1[:, kk, :]
            gp_bar = np.einsum("npi,npi->ni", t2_bar, prod)
            w = t2_bar * gp[:, None, :]
            np.add.at(a1_bar, (slice(None), jj), w * a1[:, kk, :])
            np.add.at(a1_bar, (slice(None), kk), w * a1[:, jj, :])
            s_bar = s_bar + (-2.0 + 6.0 * s * s) * gp_bar
        s_bar = s_bar - 2.0 * s * g_bar
        a_bar = s_bar * g
        W = net.weights[l]
        gw[l][...] = a_bar.T @ v_prev
        gb[l][...] = a_bar.sum(axis=0)
        v_bar = a_bar @ W
        if order >= 1:
            gw[l][...] += np.einsum("nji,njk->ik", a1_bar, t1_prev)
            t1_bar = a1_bar @ W
        if order >= 2:
            if l:
                gw[l][...] += np.einsum("npi,npk->ik", a2_bar, t2_prev)
            t2_bar = a2_bar @ W
    return grad


def derivative_tensors(net: Mlp, z, order: int):
    """``[f(z), f'(z), f''(z)]`` up to `order` for a batch ``z`` of shape ``(n, D)``.

    ``f'`` has shape ``(n, D_out, D)``; ``f''`` has shape ``(n, D_out, D, D)``.
    """
    if order > 2:
        raise UnsupportedOrderError("derivatives above order 2 are not supported")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zn = (z - net.in_shift) / net.in_scale
    out, _, (jj, kk) = _taylor_forward(net, zn, order)
    res = [out[0] * net.out_scale + net.out_shift]
    if order >= 1:
        J = out[1] * net.out_scale / net.in_scale[None, :, None]  # (n, D_in, D_out)
        res.append(np.swapaxes(J, 1, 2))
    if order >= 2:
        n, D = z.shape
        H = np.zeros((n, net.dims[-1], D, D))
        scale = net.out_scale[None, None, :] / (net.in_scale[jj] * net.in_scale[kk])[None, :, None]
        vals = np.swapaxes(out[2] * scale, 1, 2)
        H[:, :, jj, kk] = vals
        H[:, :, kk, jj] = vals
        res.append(H)
    return res


def derivative_norms(net: Mlp, z, I: int) -> np.ndarray:
    """l1-based norms ``||f^{(i)}(z)||`` for ``i = 0..I``.

    i=0: l1 norm of the output; i=1: l1-induced norm of the Jacobian (max
    column sum); i=2: l1-induced norm of the symmetric bilinear second
    derivative (max over j, k of sum_i |d2 f_i / dx_j dx_k|). Accepts one
    point ``(D,)`` or a batch ``(n, D)``.
    """
    if I > 2:
        raise UnsupportedOrderError(f"derivative order {I} > 2 is not supported")
    single = np.ndim(z) == 1
    tens = derivative_tensors(net, z, I)
    norms = [np.abs(tens[0]).sum(axis=-1)]
    if I >= 1:
        norms.append(np.abs(tens[1]).sum(axis=1).max(axis=-1))
    if I >= 2:
        norms.append(np.abs(tens[2]).sum(axis=1).max(axis=(-2, -1)))
    out = np.stack(norms, axis=-1)
    return out[0] if single else out


def derivative_norms_grad(net: Mlp, z, I: int, weights) -> tuple[float, np.ndarray]:
    """Penalty ``sum_i weights[i] * max_j ||f^{(i)}(z_j)||`` and its
    (sub)gradient with respect to the flat parameters.
    """
    if I > 2:
        raise UnsupportedOrderError(f"derivative order {I} > 2 is not supported")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n, D = z.shape
    zn = (z - net.in_shift) / net.in_scale
    out, cache, (jj, kk) = _taylor_forward(net, zn, I)
    total = 0.0
    cot = [np.zeros_like(o) for o in out]

    f0 = out[0] * net.out_scale + net.out_shift
    n0 = np.abs(f0).sum(axis=-1)
    j = int(np.argmax(n0))
    total += weights[0] * n0[j]
    cot[0][j] = weights[0] * np.sign(f0[j]) * net.out_scale

    if I >= 1:
        s1 = net.out_scale[None, None, :] / net.in_scale[None, :, None]
        J = out[1] * s1
        cols = np.abs(J).sum(axis=-1)  # (n, D_in)
        j, c = np.unravel_index(int(np.argmax(cols)), cols.shape)
        total += weights[1] * cols[j, c]
        cot[1][j, c] = weights[1] * np.sign(J[j, c]) * s1[0, c]
    if I >= 2:
        s2 = net.out_scale[None, None, :] / (net.in_scale[jj] * net.in_scale[kk])[None, :, None]
        H = out[2] * s2
        ent = np.abs(H).sum(axis=-1)  # (n, P)
        j, p = np.unravel_index(int(np.argmax(ent)), ent.shape)
        total += weights[2] * ent[j, p]
        cot[2][j, p] = weights[2] * np.sign(H[j, p]) * s2[0, p]
    return float(total), _taylor_backward(net, cache, (jj, kk), cot, I)


def taylor_weights(r1: float, I: int) -> np.ndarray:
    return np.array([r1**i / factorial(i) for i in range(I + 1)])
