#!/usr/bin/env python3
"""Lie derivatives D^k f by jet transport, checked against closed forms."""
from math import factorial

import numpy as np

from lmmdisc import VectorField, lie_derivatives, linear_field, damped_oscillator

# linear field: D^k f(x) = A^{k+1} x
A = np.array([[0.0, 1.0], [-4.0, -0.3]])
x = np.array([1.0, 0.5])
lie = lie_derivatives(linear_field(A), x, 6)
for k, v in enumerate(lie):
    ref = np.linalg.matrix_power(A, k + 1) @ x
    print(f"linear   k={k}  {v}  rel.err {np.linalg.norm(v - ref) / np.linalg.norm(ref):.1e}")

# Riccati y' = y^2: D^k f = k! (k+1) y^{k+2}
ric = VectorField(1, lambda y: [y[0] * y[0]])
for k, v in enumerate(lie_derivatives(ric, [0.5], 6)[:, 0]):
    print(f"riccati  k={k}  {v:.6f}  closed form {factorial(k) * (k + 1) * 0.5 ** (k + 2):.6f}")

# the oscillator has no closed form, so just look at the growth of |D^k f|
lie = lie_derivatives(damped_oscillator(), [2.0, 0.0], 8)
print("\n|D^k f(2,0)|_1:", " ".join(f"{v:.2e}" for v in np.abs(lie).sum(axis=1)))
