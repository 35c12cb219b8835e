"""Linear multistep schemes.

A scheme relates M+1 consecutive states through

    sum_m alpha[m] * y[n+m] = h * sum_m beta[m] * f(y[n+m]).

Every catalogued scheme is stored normalized so that ``sum(beta) == 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

__all__ = [
    "SchemeError",
    "LmmScheme",
    "ValidationReport",
    "SCHEME_NAMES",
    "catalog",
    "normalize",
    "order",
    "validate",
    "schemes_to_json",
    "scheme_from_dict",
]

TOL = 1e-12


class SchemeError(ValueError):
    """Unknown, inadmissible or non-normalizable scheme."""


@dataclass(frozen=True)
class LmmScheme:
    name: str
    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(v) for v in self.alphas)
        b = tuple(float(v) for v in self.betas)
        if len(a) != len(b) or len(a) < 2:
            raise SchemeError(
                f"{self.name}: need M+1 >= 2 alphas and betas of equal length, "
                f"got {len(a)} and {len(b)}"
            )
        if a[-1] == 0.0:
            raise SchemeError(f"{self.name}: alpha_M must be nonzero")
        if abs(a[0]) + abs(b[0]) == 0.0:
            raise SchemeError(f"{self.name}: |alpha_0| + |beta_0| must be positive")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "betas", b)

    @property
    def M(self) -> int:
        return len(self.alphas) - 1

    @property
    def explicit(self) -> bool:
        return self.betas[-1] == 0.0

    @property
    def alpha(self) -> np.ndarray:
        return np.array(self.alphas)

    @property
    def beta(self) -> np.ndarray:
        return np.array(self.betas)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "M": self.M,
            "alphas": list(self.alphas),
            "betas": list(self.betas),
            "order": order(self),
        }


@dataclass(frozen=True)
class ValidationReport:
    consistent: bool
    weakly_stable: bool
    order: int


def _frac(*vals) -> tuple[float, ...]:
    return tuple(float(Fraction(v)) for v in vals)


# Raw coefficients, oldest state first. All already satisfy sum(beta) == 1.
_RAW = {
    "AB1": (_frac(-1, 1), _frac(1, 0)),
    "AB2": (_frac(0, -1, 1), _frac("-1/2", "3/2", 0)),
    "AB3": (_frac(0, 0, -1, 1), _frac("5/12", "-16/12", "23/12", 0)),
    "BDF1": (_frac(-1, 1), _frac(0, 1)),
    "BDF2": (_frac("1/2", -2, "3/2"), _frac(0, 0, 1)),
    "BDF3": (_frac("-1/3", "3/2", -3, "11/6"), _frac(0, 0, 0, 1)),
    "AM1": (_frac(-1, 1), _frac("1/2", "1/2")),
    "AM2": (_frac(0, -1, 1), _frac("-1/12", "8/12", "5/12")),
}

SCHEME_NAMES = tuple(_RAW)


def catalog(name: str) -> LmmScheme:
    """Return the normalized catalogued scheme called `name` (e.g. ``"AB2"``)."""
    key = name.strip().upper()
    if key not in _RAW:
        raise SchemeError(
            f"unknown scheme {name!r}; choose from {', '.join(SCHEME_NAMES)}"
        )
    alphas, betas = _RAW[key]
    return normalize(LmmScheme(key, alphas, betas))


def normalize(raw: LmmScheme) -> LmmScheme:
    """Rescale alphas and betas so the betas sum to one."""
    s = float(np.sum(raw.betas))
    if abs(s) < TOL:
        raise SchemeError(
            f"{raw.name}: sum(beta) = {s:g}; scheme is not weakly stable and consistent"
        )
    if abs(s - 1.0) <= 1e-14:
        # already normalized up to rounding; keeps normalize idempotent
        return raw
    return LmmScheme(
        raw.name,
        tuple(a / s for a in raw.alphas),
        tuple(b / s for b in raw.betas),
    )


def _condition_residual(scheme: LmmScheme, k: int) -> float:
    """sum alpha_m m^{k+1}/(k+1)! - sum beta_m m^k/k!"""
    m = np.arange(scheme.M + 1, dtype=float)
    lhs = np.sum(scheme.alpha * m ** (k + 1)) / factorial(k + 1)
    rhs = np.sum(scheme.beta * m**k) / factorial(k)
    return float(lhs - rhs)


def order(scheme: LmmScheme, cap: int | None = None) -> int:
    """Largest p <= cap such that the order conditions hold for k < p.

    Returns 0 for an inconsistent scheme. `cap` defaults to M + 2.
    """
    if cap is None:
        cap = scheme.M + 2
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if abs(sum(scheme.alphas)) >= TOL:
        return 0
    p = 0
    while p < cap and abs(_condition_residual(scheme, p)) < TOL:
        p += 1
    return p


def validate(scheme: LmmScheme) -> ValidationReport:
    m = np.arange(scheme.M + 1, dtype=float)
    first_moment = float(np.sum(m * scheme.alpha))
    consistent = (
        abs(sum(scheme.alphas)) < TOL
        and abs(first_moment - sum(scheme.betas)) < TOL
    )
    return ValidationReport(
        consistent=consistent,
        weakly_stable=abs(first_moment) >= TOL,
        order=order(scheme) if consistent else 0,
    )


def scheme_from_dict(d: dict) -> LmmScheme:
    scheme = LmmScheme(d["name"], tuple(d["alphas"]), tuple(d["betas"]))
    if "M" in d and int(d["M"]) != scheme.M:
        raise SchemeError(f"{scheme.name}: M={d['M']} disagrees with coefficient count")
    return scheme


def schemes_to_json(schemes=None, indent: int | None = 2) -> str:
    """JSON listing ``[{name, M, alphas, betas, order}, ...]``."""
    if schemes is None:
        schemes = [catalog(n) for n in SCHEME_NAMES]
    return json.dumps([s.to_dict() for s in schemes], indent=indent)
