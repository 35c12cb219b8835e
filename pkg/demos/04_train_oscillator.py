#!/usr/bin/env python3
"""Train one network on oscillator data with AB1 and compare it to f and to f_h.

The network learns the IMDE of the scheme rather than f itself: its
distance to f_h^4 is far below its distance to f.
"""
import numpy as np

from lmmdisc import (TrainConfig, TruncatedImde, catalog, damped_oscillator, error_metric,
                     fit_normalization, generate_dataset, mlp_new, sample_box, train)

f = damped_oscillator()
h = 0.032
scheme = catalog("AB1")
data = generate_dataset(f, sample_box([[-2.2, 2.2]] * 2, 100, 0), scheme.M, h)
print(f"{data.N} windows of {data.M + 1} states at h = {h}")

net = mlp_new((2, 32, 32, 2), 0, **fit_normalization(data))
cfg = TrainConfig(scheme, epochs=3000, log_every=500)
net, hist = train(cfg, net, data, callback=lambda e, l, lr: print(f"epoch {e:5d} loss {l:.3e}"))

T = np.random.default_rng(1).uniform(-2, 2, (2000, 2))
print(f"Error(f_theta, f)     = {error_metric(net, f, T):.3e}")
print(f"Error(f_theta, f_h^4) = {error_metric(net, TruncatedImde(scheme, f, 4).at_step(h), T):.3e}")
