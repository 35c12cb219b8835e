#!/usr/bin/env python3
"""Lorenz from a single trajectory: AB1 at two step sizes.

Doubling h doubles the error of the learned field, the first-order
signature of the scheme.
"""
from lmmdisc.cli import ExperimentSpec, run_cell
from lmmdisc.train import convergence_orders

spec = ExperimentSpec(system="lorenz", schemes=["AB1"], h=[0.016, 0.032], epochs=3000)
errs = []
for h in spec.h:
    res = run_cell(spec, "AB1", h, 0)
    errs.append(res.error_f)
    print(f"h = {h}: Error(f_theta, f) = {res.error_f:.3e}, test loss {res.test_loss:.3e}")
print(f"order = {convergence_orders(errs, spec.h)[0]:.3f}")
