from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lmmdisc.dynamics import damped_oscillator, linear_field, rk4_flow
from lmmdisc.jets import Jet, SingularityError, VectorField, flow_jet, lie_derivatives

riccati = VectorField(1, lambda y: [y[0] ** 2], "riccati")


def test_flow_jet_linear():
    A = np.array([[0.0, 1.0], [-2.0, -0.3]])
    x = np.array([0.7, -1.1])
    c = flow_jet(linear_field(A), x, 3).coeffs
    expect = [x, A @ x, A @ A @ x / 2, A @ A @ A @ x / 6]
    np.testing.assert_allclose(c, expect, rtol=1e-14, atol=1e-15)


def test_flow_jet_riccati_geometric_series():
    # phi_t(1) = 1/(1-t)
    c = flow_jet(riccati, [1.0], 3).coeffs[:, 0]
    np.testing.assert_array_equal(c, [1.0, 1.0, 1.0, 1.0])


def test_flow_jet_degree_zero():
    x = np.array([0.3, 0.4])
    c = flow_jet(damped_oscillator(), x, 0).coeffs
    np.testing.assert_array_equal(c, [x])


def test_lie_derivatives_linear():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(3, 3))
    x = rng.normal(size=3)
    lie = lie_derivatives(linear_field(A), x, 6)
    v = x
    for k in range(7):
        v = A @ v
        np.testing.assert_allclose(lie[k], v, rtol=1e-11)


def test_lie_derivatives_riccati():
    x = 0.6
    lie = lie_derivatives(riccati, [x], 8)[:, 0]
    for k in range(9):
        expect = factorial(k) * (k + 1) * x ** (k + 2)
        assert abs(lie[k] - expect) <= 1e-12 * expect


def test_lie_derivative_zero_is_field():
    f = damped_oscillator()
    x = np.array([2.0, 0.0])
    np.testing.assert_array_equal(lie_derivatives(f, x, 3)[0], f(x))


def test_first_lie_derivative_finite_difference():
    f = damped_oscillator()
    x = np.array([1.3, -0.4])
    d1 = lie_derivatives(f, x, 1)[1]
    errs = []
    for eps in (1e-2, 5e-3):
        fd = (f(rk4_flow(f, x, eps, 50)) - f(rk4_flow(f, x, -eps, 50))) / (2 * eps)
        errs.append(np.max(np.abs(fd - d1)))
    # central difference: error shrinks like eps^2
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-2


def test_lie_derivatives_batched_matches_pointwise():
    f = damped_oscillator()
    pts = np.random.default_rng(0).uniform(-2, 2, (5, 2))
    batch = lie_derivatives(f, pts, 4)
    for i, p in enumerate(pts):
        np.testing.assert_allclose(batch[:, i], lie_derivatives(f, p, 4), rtol=1e-14)


def test_jet_eval_degree_zero_matches_eval():
    f = damped_oscillator()
    x = np.array([0.5, -1.5])
    ys = [Jet.variable(x[0], 3), Jet.constant(x[1], 3)]
    out = f.jet_eval(ys)
    np.testing.assert_allclose([o.coeffs[0] for o in out], f(x))


def test_division_and_singularity():
    one_minus_t = Jet([1.0, -1.0, 0.0, 0.0])
    np.testing.assert_allclose((1.0 / one_minus_t).coeffs, [1, 1, 1, 1])
    with pytest.raises(SingularityError):
        _ = 1.0 / Jet([0.0, 1.0, 0.0])
    with pytest.raises(SingularityError):
        _ = Jet([1.0, 2.0]) / 0.0
    singular = VectorField(1, lambda y: [1.0 / y[0]])
    with pytest.raises(SingularityError):
        flow_jet(singular, [0.0], 2)


def test_integer_powers():
    t = Jet.variable(2.0, 4)
    np.testing.assert_allclose((t**3).coeffs, [8, 12, 6, 1, 0])
    np.testing.assert_allclose((t**-1).coeffs, [1 / 2, -1 / 4, 1 / 8, -1 / 16, 1 / 32])
    assert (t**0).coeffs[0] == 1.0
    with pytest.raises(TypeError):
        _ = t**0.5


jets4 = arrays(np.float64, 5, elements=st.floats(-3, 3))


@settings(max_examples=50)
@given(jets4, jets4, jets4)
def test_cauchy_product_commutative_associative(a, b, c):
    A, B, C = Jet(a), Jet(b), Jet(c)
    np.testing.assert_allclose((A * B).coeffs, (B * A).coeffs, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(((A * B) * C).coeffs, (A * (B * C)).coeffs,
                               rtol=1e-13, atol=1e-11)


@settings(max_examples=50)
@given(jets4, jets4)
def test_division_inverts_product(a, b):
    b = b.copy()
    b[0] = 1.0 + abs(b[0])
    A, B = Jet(a), Jet(b)
    np.testing.assert_allclose(((A * B) / B).coeffs, a, rtol=1e-9, atol=1e-9)
