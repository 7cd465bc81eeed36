"""Steering the solution towards a target with the extra drift ``M/(t - tau) (Z - a~)``.

Prints the fitted decay rates against ``M/(t - tau)`` and the hitting
probabilities with Wilson intervals.  Run with
``python demos/irreducibility_control.py``.
"""

import numpy as np

from degspde.experiments import irreducibility_run
from degspde.experiments.irreducibility import parabola_target
from degspde.solver import ModelParams
from degspde.spectral import build_basis

params = ModelParams()
basis = build_basis(params.bc, params.domain_length, 32)
a = parabola_target(basis, 0.5)
rep = irreducibility_run(np.zeros(32), a, 0.5, 0.4, (0.0, 5.0, 10.0), 0.5, params, 200)
for M in rep.gains:
    lo, hi = rep.wilson[M]
    line = f"M = {M:4g}: P(hit) = {rep.hit_probability[M]:.3f} [{lo:.3f}, {hi:.3f}]"
    if M in rep.rates:
        f = rep.rates[M]
        line += f"   rate {f.rate:.2f} vs {f.expected:.0f}"
    print(line)
