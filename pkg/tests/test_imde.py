from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from lmmdisc.dynamics import constant_field, damped_oscillator, linear_field
from lmmdisc.imde import (K_MAX, ImdeError, TruncatedImde, eval_truncated_imde, leading_term,
                          residual, xi_coefficients, xi_oracle_check, xi_series)
from lmmdisc.jets import lie_derivatives
from lmmdisc.lmm import SCHEME_NAMES, LmmScheme, catalog, order

TABLE3 = {"AB2": (2, 5 / 12), "BDF2": (2, -1 / 3), "AM1": (2, -1 / 12),
          "AB3": (3, 3 / 8), "BDF3": (3, -1 / 4), "AM2": (3, -1 / 24)}

EXACT = {
    "AB1": ((-1, 1), (1, 0)),
    "AB2": ((0, -1, 1), (Fraction(-1, 2), Fraction(3, 2), 0)),
    "AB3": ((0, 0, -1, 1), (Fraction(5, 12), Fraction(-16, 12), Fraction(23, 12), 0)),
    "BDF1": ((-1, 1), (0, 1)),
    "BDF2": ((Fraction(1, 2), -2, Fraction(3, 2)), (0, 0, 1)),
    "BDF3": ((Fraction(-1, 3), Fraction(3, 2), -3, Fraction(11, 6)), (0, 0, 0, 1)),
    "AM1": ((-1, 1), (Fraction(1, 2), Fraction(1, 2))),
    "AM2": ((0, -1, 1), (Fraction(-1, 12), Fraction(8, 12), Fraction(5, 12))),
}


def exact_xis(name, K):
    """The recursion in rational arithmetic: an exact reference."""
    a, b = (list(map(Fraction, v)) for v in EXACT[name])
    xi = [Fraction(1)]
    for k in range(1, K + 1):
        acc = sum(am * Fraction(m) ** (k + 1) for m, am in enumerate(a)) / factorial(k + 1)
        for j in range(1, k + 1):
            acc -= sum(bm * Fraction(m) ** j for m, bm in enumerate(b)) / factorial(j) * xi[k - j]
        xi.append(acc)
    return xi


@pytest.mark.parametrize("name", sorted(TABLE3))
def test_table3_leading_coefficients(name):
    p, c = TABLE3[name]
    assert abs(xi_coefficients(catalog(name), p)[p] - c) < 1e-12
    lp, lc = leading_term(catalog(name))
    assert lp == p and abs(lc - c) < 1e-12


def test_first_order_xi1():
    assert xi_coefficients(catalog("AB1"), 1)[1] == pytest.approx(0.5, abs=1e-15)
    assert xi_coefficients(catalog("BDF1"), 1)[1] == pytest.approx(-0.5, abs=1e-15)
    assert leading_term(catalog("AB1")) == (1, pytest.approx(0.5))


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_xi_sequence_structure(name):
    s = catalog(name)
    xs = xi_coefficients(s, K_MAX)
    p = order(s)
    assert xs[0] == 1.0
    assert all(abs(xs[k]) < 1e-12 for k in range(1, p))
    assert abs(xs[p]) > 1e-3
    ref = [float(v) for v in exact_xis(name, K_MAX)]
    np.testing.assert_allclose(xs.xis, ref, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_generating_function_oracle(name):
    for K in (0, 8, 10):
        assert xi_oracle_check(catalog(name), K) < 1e-9
    assert xi_series(catalog(name), 0)[0] == pytest.approx(1.0, abs=1e-15)


def test_oracle_check_caps_K():
    with pytest.raises(ValueError):
        xi_oracle_check(catalog("AB1"), 13)


def test_contract_errors():
    with pytest.raises(ImdeError):
        xi_coefficients(LmmScheme("raw", (-2, 2), (2, 0)), 3)  # not normalized
    with pytest.raises(ImdeError):
        xi_coefficients(LmmScheme("x", (1, -2, 1), (0, 1, 0)), 3)  # sum(beta) = 1 but inconsistent
    with pytest.raises(ImdeError):
        leading_term(LmmScheme("x", (1, -2, 1), (0, 1, 0)))


def test_truncated_imde_reduces_to_field():
    f = damped_oscillator()
    x = np.array([1.2, -0.7])
    for name in ("AB1", "AM2"):
        np.testing.assert_array_equal(TruncatedImde(catalog(name), f, 0)(x, 0.1), f(x))
        np.testing.assert_array_equal(TruncatedImde(catalog(name), f, 4)(x, 0.0), f(x))


def test_truncated_imde_linear_oracle():
    A = np.array([[0.0, 1.0], [-1.0, -0.2]])
    x = np.array([0.4, 1.0])
    h = 0.05
    s = catalog("AB1")
    xi2 = xi_coefficients(s, 2)[2]
    hA = h * A
    expect = (np.eye(2) + 0.5 * hA + xi2 * hA @ hA) @ A @ x
    got = eval_truncated_imde(TruncatedImde(s, linear_field(A), 2), x, h)
    np.testing.assert_allclose(got, expect, rtol=1e-13)


def test_at_step_field_and_batch():
    f = damped_oscillator()
    imde = TruncatedImde(catalog("BDF2"), f, 4)
    pts = np.random.default_rng(1).uniform(-2, 2, (7, 2))
    g = imde.at_step(0.01)
    np.testing.assert_allclose(g(pts), [imde(p, 0.01) for p in pts], rtol=1e-14)


def test_adaptive_truncation_stops_when_terms_grow():
    f = damped_oscillator()
    s = catalog("AB1")
    x = np.array([2.0, 0.0])
    ad = TruncatedImde(s, f, None)
    xi = xi_coefficients(s, K_MAX).xis
    lie = lie_derivatives(f, x, K_MAX)
    # small h: terms decay, adaptive sum agrees with the long truncation
    h = 1e-3
    full = sum(h**k * xi[k] * lie[k] for k in range(K_MAX + 1))
    np.testing.assert_allclose(ad(x, h), full, rtol=1e-12)
    # large h: the series diverges; adaptive stops before the first growing term
    h = 0.05
    sizes = [np.abs(h**k * xi[k] * lie[k]).sum() for k in range(K_MAX + 1)]
    stop = next(k for k in range(1, K_MAX + 1) if xi[k] != 0 and sizes[k] > sizes[k - 1])
    partial = sum(h**k * xi[k] * lie[k] for k in range(stop))
    np.testing.assert_allclose(ad(x, h), partial, rtol=1e-12)


def test_residual_constant_field_is_zero():
    f = constant_field([1.5, -0.25])
    for name in SCHEME_NAMES:
        s = catalog(name)
        r = residual(s, f, TruncatedImde(s, f, 3), np.array([0.2, 0.3]), 0.1)
        assert np.max(np.abs(r)) < 1e-13  # zero up to rounding


def _slope(name, K, x, hs=(0.02, 0.01, 0.005)):
    f = damped_oscillator()
    s = catalog(name)
    imde = TruncatedImde(s, f, K)
    r = [np.abs(residual(s, f, imde, np.asarray(x, float), h)).sum() for h in hs]
    return np.polyfit(np.log2(hs), np.log2(r), 1)[0]


@pytest.mark.parametrize("name,K", [("AB1", 0), ("BDF1", 0), ("AB1", 2), ("BDF1", 2),
                                    ("AB2", 2)])
def test_residual_slope_at_2_0(name, K):
    assert abs(_slope(name, K, [2.0, 0.0]) - (K + 2)) < 0.3


@pytest.mark.parametrize("name", ["AB1", "BDF1"])
def test_residual_slope_k1_generic_point(name):
    # at (2, 0) the h^4 term dominates h^3 for these h; see the decisions notes
    assert abs(_slope(name, 1, [0.5, 0.5]) - 3) < 0.3


@pytest.mark.parametrize("name", ["AB1", "AB2", "BDF2", "AM1", "AB3"])
def test_imde_minus_field_scales_like_h_to_p(name):
    f = damped_oscillator()
    s = catalog(name)
    p = order(s)
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5)), -1).reshape(-1, 2)
    imde = TruncatedImde(s, f, 4)
    hs = np.array([0.004, 0.002, 0.001])
    d = [np.abs(imde(grid, h) - f(grid)).sum(axis=-1).mean() for h in hs]
    assert np.polyfit(np.log(hs), np.log(d), 1)[0] >= p - 0.2
