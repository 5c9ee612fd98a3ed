"""
Post-outage flows without refactorizing
=======================================

Every single-line outage changes the bus admittance matrix by a rank-one
term, so the post-outage flows follow from the intact PTDF plus one extra
vector per contingency. Here the closed form is checked against a fresh
angle solve on each reduced network.
"""

import numpy as np

import ibpscopf as ib
from ibpscopf.contingency_ops import contingency_flows, direct_recompute_oracle, precompute

case = ib.random_case(40, density=1.6, seed=3)
nm = ib.build_ptdf(case)
ops = precompute(nm, case)
print(case.n_lines, "lines,", ops.n_contingencies, "non-islanding outages")

###############################################################################
# Draw a balanced injection and compute all post-outage flows at once.

rng = np.random.default_rng(0)
p = rng.normal(size=case.n_buses)
p -= p.mean()
P = contingency_flows(ops, nm, p)
print("flow matrix shape", P.shape)

###############################################################################
# Compare against solving each outaged network from scratch.

err = max(np.abs(P[k] - direct_recompute_oracle(case, line, p)).max()
          for k, line in enumerate(ops.ctg_line_ids))
print("max deviation from direct recompute: %.2e" % err)

###############################################################################
# Denominators close to zero flag outages that nearly island the grid.

order = np.argsort(ops.denominators)
for k in order[:5]:
    print(f"line {ops.ctg_line_ids[k]:3d}: denominator {ops.denominators[k]:.4f}")
