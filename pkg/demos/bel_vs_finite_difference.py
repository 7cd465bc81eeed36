"""Derivative of a transition semigroup two ways: the Bismut-Elworthy-Li
estimator and a paired central difference, on a small problem.

Run with ``python demos/bel_vs_finite_difference.py`` (about a minute).
"""

import math

import numpy as np

from degspde.experiments import bel_estimate
from degspde.solver import ModelParams

params = ModelParams(alpha=4, beta=1, delta=0.45, sigma=0.15, epsilon=0.2)
n = 8
h = np.zeros(n)
h[0] = 1.0

# linear Gaussian mode has a closed form
rep, _ = bel_estimate(np.zeros(n), h, "mode_projection(1)", 0.25, params, 20_000, n_modes=n, dt=5e-3,
                      drift_mode="linear", noise_mode="additive")
print(f"linear: analytic {rep.analytic:.5f}  BEL {rep.bel_estimate:.5f} +- {rep.bel_stderr:.5f}  FD {rep.fd_estimate:.5f}")

x = np.zeros(n)
x[0] = 0.3 * math.sqrt(math.pi / 2)
rep, samples = bel_estimate(x, h, "smoothed_mass", 0.25, params, 20_000, n_modes=n, dt=5e-3)
print(f"nonlinear: BEL {rep.bel_estimate:.4f} +- {rep.bel_stderr:.4f}  FD {rep.fd_estimate:.4f} +- {rep.fd_stderr:.4f}  z = {rep.z_score:.2f}")
print(f"rejected samples: {rep.n_rejected}")
