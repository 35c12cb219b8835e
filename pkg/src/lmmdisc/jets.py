"""Truncated Taylor arithmetic and Lie derivatives of vector fields.

A :class:`Jet` stores the Taylor coefficients ``c[0..K]`` of a curve
``t -> y(t)``; ``c[k]`` is the coefficient of ``t**k`` (not the k-th
derivative). Trailing axes of the coefficient array are batch axes, so a
single Jet can carry many curves at once.

Vector fields are written once, component-wise, using only ``+ - * /`` and
integer powers. The same formula then evaluates on floats, numpy arrays and
Jets::

    def rhs(y):
        p, q = y
        return [-0.1 * p**3 + 2.0 * q**3, -2.0 * p**3 - 0.1 * q**3]

    field = VectorField(2, rhs, "damped_oscillator")
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SingularityError",
    "Jet",
    "VectorField",
    "flow_jet",
    "lie_derivatives",
]


class SingularityError(ZeroDivisionError):
    """Jet division by a series with vanishing constant term."""


class Jet:
    __array_ufunc__ = None  # make ndarray defer to our reflected operators

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim == 0:
            c = c[None]
        if c.shape[0] < 1:
            raise ValueError("a jet needs at least one coefficient")
        self.coeffs = c

    @classmethod
    def constant(cls, value, degree: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((degree + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @classmethod
    def variable(cls, value, degree: int) -> "Jet":
        """The curve ``t -> value + t``."""
        jet = cls.constant(value, degree)
        if degree >= 1:
            jet.coeffs[1] = 1.0
        return jet

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __len__(self):
        return self.coeffs.shape[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __repr__(self):
        return f"Jet(degree={self.degree}, coeffs={self.coeffs!r})"

    def derivatives(self) -> np.ndarray:
        """k-th derivatives at t=0, i.e. ``k! * c[k]``."""
        fact = np.array([factorial(k) for k in range(len(self))], dtype=float)
        return self.coeffs * fact.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))

    def _coerce(self, other):
        if isinstance(other, Jet):
            n = min(len(self), len(other))
            a, b = self.coeffs[:n], other.coeffs[:n]
        else:
            a, b = self.coeffs, Jet.constant(other, self.degree).coeffs
        batch = np.broadcast_shapes(a.shape[1:], b.shape[1:])
        return _expand(a, batch), _expand(b, batch)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __pos__(self):
        return self

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a - b)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(b - a)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            a, b = self._coerce(other)
            return Jet(a * b[:1])
        a, b = self._coerce(other)
        return Jet(_cauchy(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            a, b = self._coerce(other)
            if np.any(b[0] == 0.0):
                raise SingularityError("jet divided by zero constant")
            return Jet(a / b[:1])
        a, b = self._coerce(other)
        return Jet(_divide(a, b))

    def __rtruediv__(self, other):
        a, b = self._coerce(other)
        return Jet(_divide(b, a))

    def __pow__(self, n):
        if isinstance(n, (float, np.floating)) and float(n).is_integer():
            n = int(n)
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jets support integer exponents only")
        n = int(n)
        if n < 0:
            return 1.0 / self ** (-n)
        result = Jet.constant(np.ones(self.coeffs.shape[1:]), self.degree)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result


def _expand(c: np.ndarray, batch: tuple) -> np.ndarray:
    c = c.reshape(c.shape[:1] + (1,) * (len(batch) - c.ndim + 1) + c.shape[1:])
    return np.broadcast_to(c, c.shape[:1] + batch)


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    for k in range(a.shape[0]):
        out[k] = np.sum(a[: k + 1] * b[k::-1], axis=0)
    return out


def _divide(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if np.any(b[0] == 0.0):
        raise SingularityError("jet division by a series with zero constant term")
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[0] = a[0] / b[0]
    for k in range(1, a.shape[0]):
        out[k] = (a[k] - np.sum(b[1 : k + 1] * out[k - 1 :: -1], axis=0)) / b[0]
    return out


@dataclass
class VectorField:
    """Autonomous vector field ``f: R^D -> R^D``.

    `func` maps a sequence of D components to a sequence of D components and
    must stick to ``+ - * /`` and integer powers so that it also accepts
    Jets. Fields that cannot be lifted (e.g. a neural network) pass
    `array_func` instead, taking and returning arrays of shape ``(..., D)``.
    """

    dim: int
    func: Callable[[Sequence], Sequence] | None = None
    name: str = "field"
    array_func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.func is None and self.array_func is None:
            raise ValueError("VectorField needs func or array_func")

    @property
    def liftable(self) -> bool:
        return self.func is not None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected last axis {self.dim}, got {x.shape}")
        if self.array_func is not None:
            return np.asarray(self.array_func(x), dtype=float)
        comps = self.func([x[..., i] for i in range(self.dim)])
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), x.shape[:-1])
                         for c in comps], axis=-1)

    def jet_eval(self, ys: Sequence[Jet]) -> list[Jet]:
        """Apply the formula to D component jets of equal degree."""
        if self.func is None:
            raise TypeError(f"{self.name} cannot be evaluated on jets")
        degree = ys[0].degree
        out = []
        for c in self.func(list(ys)):
            if not isinstance(c, Jet):
                c = Jet.constant(np.broadcast_to(c, ys[0].coeffs.shape[1:]), degree)
            out.append(c)
        return out


def _split(jet: Jet, dim: int) -> list[Jet]:
    return [Jet(jet.coeffs[..., i]) for i in range(dim)]


def _stack(jets: Sequence[Jet]) -> Jet:
    return Jet(np.stack([j.coeffs for j in jets], axis=-1))


def flow_jet(f: VectorField, x, K: int) -> Jet:
    """Taylor coefficients ``y_0..y_K`` of the exact flow through `x`.

    `x` has shape ``(..., D)``; the returned jet's coefficients have shape
    ``(K+1, ..., D)``. Built by the Picard recursion
    ``y_{k+1} = [f(y)]_k / (k+1)``.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    x = np.asarray(x, dtype=float)
    coeffs = np.zeros((K + 1,) + x.shape)
    coeffs[0] = x
    for k in range(K):
        fy = f.jet_eval(_split(Jet(coeffs[: k + 1]), f.dim))
        coeffs[k + 1] = np.stack([c.coeffs[k] for c in fy], axis=-1) / (k + 1)
    return Jet(coeffs)


def lie_derivatives(f: VectorField, x, K: int) -> np.ndarray:
    """``[D^0 f(x), ..., D^K f(x)]`` as an array of shape ``(K+1, ..., D)``,
    where ``D g = g' f``.
    """
    y = flow_jet(f, x, K)
    fy = _stack(f.jet_eval(_split(y, f.dim)))
    return fy.derivatives()
