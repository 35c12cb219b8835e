#!/usr/bin/env python3
"""The xi coefficients of every catalogued scheme.

f_h = f + h^p xi_p D^p f + ...; the first nonzero xi_k sits at k = p, the
order of the scheme. The generating-function check is printed alongside.
"""
import numpy as np

from lmmdisc import SCHEME_NAMES, catalog, order, xi_coefficients, xi_oracle_check

K = 6
print("scheme  p   " + "  ".join(f"xi_{k:<9d}" for k in range(1, K + 1)) + "  oracle gap")
for name in SCHEME_NAMES:
    s = catalog(name)
    xs = xi_coefficients(s, K).xis
    row = "  ".join(f"{v:+.4e}" for v in xs[1:])
    print(f"{name:6s}  {order(s)}   {row}  {xi_oracle_check(s, K):.1e}")

# AM1 is the trapezoidal rule: symmetric, so every odd xi vanishes
am1 = xi_coefficients(catalog("AM1"), K).xis
print("\nAM1 odd terms:", np.abs(am1[1::2]).max())
