"""Singular potentials, their regularisation and the lemma property suite.

Run with ``python demos/potentials_and_tables.py``.
"""

import numpy as np

from degspde.potentials import eval_N, lemma_property_suite, potential_table, psi1

r = np.array([0.0, 0.5, 0.9, 0.99, 0.999])
print("Psi'_2 exact      :", np.round(psi1(2.0, r), 6))
for eps in (0.2, 0.05, 0.01):
    tab = potential_table(2.0, eps)
    print(f"Psi'_2 eps={eps:<5}:", np.round(tab.dpsi(r), 6), " Psi'' cap", f"{tab.q_max:.3g}")

# N_{beta,gamma} grows with gamma and reduces to r^2 on the diagonal
for gamma in (1.0, 2.0, 3.0):
    print(f"N_1,{gamma:g}(2) =", round(eval_N(1.0, gamma, 2.0), 6))

items = lemma_property_suite(epsilons=(0.2, 0.05), exponents=(1, 2, 3))
print(f"lemma suite: {sum(it.passed for it in items)}/{len(items)} items pass")
for it in items[:6]:
    print(f"  ({it.item}) exponents {it.exponents} eps {it.epsilon}: [{it.lower:.4g}, {it.upper:.4g}] {it.detail}")
