"""Inverse modified differential equations of linear multistep schemes.

Applying a consistent, weakly stable scheme to exact flow samples of
``y' = f(y)`` is (formally) exact for a perturbed field

    f_h = f + h f_1 + h^2 f_2 + ...,      f_k = xi_k * D^k f,

where the scalars ``xi_k`` depend on the scheme coefficients only. A network
trained on the scheme's residual loss approximates ``f_h``, not ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .jets import Jet, VectorField, lie_derivatives
from .lmm import LmmScheme, order, validate

__all__ = [
    "ImdeError",
    "XiSequence",
    "TruncatedImde",
    "K_MAX",
    "xi_coefficients",
    "leading_term",
    "eval_truncated_imde",
    "residual",
    "xi_oracle_check",
    "xi_series",
]

K_MAX = 10


class ImdeError(ValueError):
    """Scheme does not meet the contract (normalized, consistent, weakly stable)."""


@dataclass(frozen=True)
class XiSequence:
    scheme: LmmScheme
    xis: np.ndarray

    def __getitem__(self, k):
        return self.xis[k]

    def __len__(self):
        return len(self.xis)


def _check_scheme(scheme: LmmScheme) -> None:
    if abs(sum(scheme.betas) - 1.0) > 1e-12:
        raise ImdeError(f"{scheme.name}: scheme must be normalized (sum(beta) = 1)")
    report = validate(scheme)
    if not (report.consistent and report.weakly_stable):
        raise ImdeError(f"{scheme.name}: scheme must be consistent and weakly stable")


def xi_coefficients(scheme: LmmScheme, K: int) -> XiSequence:
    """``xi_0..xi_K`` from the recursion

    xi_k = sum_m a_m m^{k+1}/(k+1)! - sum_m b_m sum_{j=1..k} m^j/j! xi_{k-j}.
    """
    _check_scheme(scheme)
    if K < 0:
        raise ValueError("K must be >= 0")
    m = np.arange(scheme.M + 1, dtype=float)
    a, b = scheme.alpha, scheme.beta
    xi = np.zeros(K + 1)
    xi[0] = 1.0
    for k in range(1, K + 1):
        acc = np.sum(a * m ** (k + 1)) / factorial(k + 1)
        for j in range(1, k + 1):
            acc -= np.sum(b * m**j) / factorial(j) * xi[k - j]
        xi[k] = acc
    return XiSequence(scheme, xi)


def leading_term(scheme: LmmScheme) -> tuple[int, float]:
    """Order p and leading coefficient of ``f_h - f = h^p coeff D^p f + ...``."""
    _check_scheme(scheme)
    # an M-step scheme cannot exceed order 2M
    p = order(scheme, cap=2 * scheme.M + 1)
    if p < 1:
        raise ImdeError(f"{scheme.name}: scheme is not consistent")
    m = np.arange(scheme.M + 1, dtype=float)
    coeff = (np.sum(scheme.alpha * m ** (p + 1)) / factorial(p + 1)
             - np.sum(scheme.beta * m**p) / factorial(p))
    return p, float(coeff)


def xi_series(scheme: LmmScheme, K: int) -> np.ndarray:
    """Taylor coefficients of ``(sum a_m (e^{mz}-1)/z) / (sum b_m e^{mz})``.

    Computed by jet division of the two series, independently of the
    recursion in :func:`xi_coefficients`.
    """
    m = np.arange(scheme.M + 1, dtype=float)
    k = np.arange(K + 1)
    fact = np.array([factorial(i) for i in range(K + 2)], dtype=float)
    num = np.array([np.sum(scheme.alpha * m ** (i + 1)) / fact[i + 1] for i in k])
    den = np.array([np.sum(scheme.beta * m**i) / fact[i] for i in k])
    return (Jet(num) / Jet(den)).coeffs


def xi_oracle_check(scheme: LmmScheme, K: int) -> float:
    """Max deviation between the recursion and the generating-function series."""
    if K > 12:
        raise ValueError("xi_oracle_check supports K <= 12")
    series = xi_series(scheme, K)
    xis = xi_coefficients(scheme, K).xis
    return float(np.max(np.abs(series - xis)))


@dataclass
class TruncatedImde:
    """``f_h^K = sum_{k<=K} h^k xi_k D^k f``.

    With ``K=None`` the sum is cut adaptively per point: terms are added
    until the l1 size of the next nonzero term grows, up to ``K_MAX``.
    """

    scheme: LmmScheme
    field: VectorField
    K: int | None = 4

    def __post_init__(self):
        if self.K is not None and self.K < 0:
            raise ValueError("K must be >= 0")
        kmax = K_MAX if self.K is None else self.K
        self._xi = xi_coefficients(self.scheme, kmax).xis

    def __call__(self, x, h: float) -> np.ndarray:
        return eval_truncated_imde(self, x, h)

    def at_step(self, h: float) -> VectorField:
        """The truncated IMDE at fixed `h` as a plain (array-only) field."""
        return VectorField(self.field.dim, name=f"imde[{self.scheme.name},h={h:g}]",
                           array_func=lambda x: eval_truncated_imde(self, x, h))


def eval_truncated_imde(imde: TruncatedImde, x, h: float) -> np.ndarray:
    if h < 0:
        raise ValueError("h must be >= 0")
    x = np.asarray(x, dtype=float)
    xi = imde._xi
    kmax = len(xi) - 1
    if h == 0 or kmax == 0:
        return imde.field(x)
    lie = lie_derivatives(imde.field, x, kmax)
    terms = (h ** np.arange(kmax + 1) * xi).reshape((-1,) + (1,) * x.ndim) * lie
    if imde.K is not None:
        return terms.sum(axis=0)
    return _adaptive_sum(terms, xi)


def _adaptive_sum(terms: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = terms[0].copy()
    size = np.abs(terms).sum(axis=-1)
    last = np.full(size.shape[1:], np.inf)
    active = np.ones(size.shape[1:], dtype=bool)
    for k in range(1, len(xi)):
        if xi[k] == 0.0:
            continue
        active &= size[k] <= last
        out += np.where(active[..., None], terms[k], 0.0)
        last = np.where(active, size[k], last)
    return out


def residual(scheme: LmmScheme, f: VectorField, imde: TruncatedImde, x, h: float,
             substeps: int = 200) -> np.ndarray:
    """``sum a_m phi_{mh}(x) - h sum b_m f_h^K(phi_{mh}(x))``, flows by fine RK4."""
    from .dynamics import rk4_trajectory

    states = rk4_trajectory(f, x, h, scheme.M, substeps)
    fh = eval_truncated_imde(imde, states, h)
    a = scheme.alpha.reshape((-1,) + (1,) * (states.ndim - 1))
    b = scheme.beta.reshape(a.shape)
    return np.sum(a * states, axis=0) - h * np.sum(b * fh, axis=0)
