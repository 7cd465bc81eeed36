"""Empirical distribution of the distance to the barriers under strong noise.

Run with ``python demos/separation_layer.py``.
"""

import numpy as np

from degspde.experiments import separation_run
from degspde.solver import ModelParams, SolverConfig

params = ModelParams(alpha=2, beta=1, gamma=2, delta=0.26, sigma=0.0, epsilon=0.05)
config = SolverConfig(n_modes=32, dt=1e-3, horizon=2.0, seed=0)
rep = separation_run(np.zeros(32), params, config, 200)
print("layer quantiles:", {q: round(v, 3) for q, v in rep.quantiles().items()})
for L in rep.ladder:
    lo, hi = rep.wilson[L]
    print(f"P(sup|X| > {1 - L:.2f}) = {rep.exceedance[L]:.3f}  [{lo:.3f}, {hi:.3f}]")
print(f"largest excursion {rep.max_sup:.3f}, budget {rep.excursion_budget:.2f}")
