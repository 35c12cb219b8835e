#!/usr/bin/env python3
"""The seven-species glycolytic oscillator: field, trajectory and IMDE terms."""
from pathlib import Path

import numpy as np

from lmmdisc import (GlycolyticParams, TruncatedImde, catalog, glycolytic, lie_derivatives,
                     rk4_trajectory)

p = GlycolyticParams.from_json(Path(__file__).with_name("glycolytic_params.json"))
f = glycolytic(p)
y0 = np.array([1.125, 0.95, 0.075, 0.16, 0.265, 0.7, 0.092])
print("f(y0) =", np.round(f(y0), 4))

traj = rk4_trajectory(f, y0, 0.01, 300, 10)
print("S1 over t in [0, 3]:", np.round(traj[::50, 0], 3))

lie = lie_derivatives(f, y0, 4)
print("|D^k f(y0)|_1, k = 0..4:", " ".join(f"{v:.2e}" for v in np.abs(lie).sum(axis=1)))
for name in ("AB1", "AB2", "BDF2"):
    g = TruncatedImde(catalog(name), f, 4)
    print(f"{name}: |f_h^4 - f|_1 at h = 0.001 is {np.abs(g(y0, 0.001) - f(y0)).sum():.3e}")
