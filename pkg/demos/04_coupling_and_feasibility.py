"""Counterfactual couplings and joint-probability feasibility.

Run: python demos/04_coupling_and_feasibility.py
"""
import numpy as np

from bellsim import (JointDistribution16, empirical_chsh_from_coupling, exact_report, gallery_model,
                     gallery_names, jp_feasibility, product_coupling, sample_coupling)
from bellsim.coupling import pairwise_from_moments

# A coupling realizes a1, a2, b1, b2 in every trial, so each trial contributes
# +2 or -2 and the sample mean can never leave [-2, 2].
rs = np.random.default_rng(0)
for i in range(5):
    jp = JointDistribution16(rs.dirichlet(np.full(16, 0.2)))
    print(f"random coupling {i}: S = {empirical_chsh_from_coupling(sample_coupling(jp, 100_000, i)):+.4f}")

# The product coupling of a zero-free model1 model reproduces its pairwise
# statistics exactly.
jp = product_coupling(gallery_model("triangle_local"))
print("\ntriangle_local coupling feasible:", jp_feasibility(jp.pairwise()).status)

# Which post-selected oracle tables admit a joint distribution at all?
print()
for name in gallery_names():
    rep = exact_report(gallery_model(name))
    res = jp_feasibility(rep.pairwise_distributions())
    print(f"{name:<22} S_max={rep.conditional_chsh()[1]:.4f}  {res.status}")

# Textbook extremes.
print()
for label, e in [("PR box", [1, 1, 1, -1]), ("cos(pi/4) table", [-0.7071, -0.7071, -0.7071, 0.7071])]:
    res = jp_feasibility(pairwise_from_moments(e, [0, 0], [0, 0]))
    print(f"{label:<16} {res.status}, facet violation {res.max_facet_violation:.4f}")
