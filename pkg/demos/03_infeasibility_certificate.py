"""
Proving that no dispatch is worth running
=========================================

In the infeasible3 case every generator costs more than any consumer is
willing to pay, and the generators must run at a combined minimum of 2.0
while demand can absorb at most 1.5. A negative certified upper bound proves
that no point in the box earns a positive surplus, without solving any
optimization problem.
"""

from pathlib import Path

import ibpscopf as ib

case = ib.load_case(Path(__file__).resolve().parents[1] / "docs" / "cases" / "infeasible3.json")
report = ib.compute_bounds(ib.build_pipeline(case))
print("upper bound %.1f, certificate: %s" % (report.objective_upper, report.infeasible_certificate))
print("injection slack at least %.2f" % report.slack_bounds["s_inj"][0])

###############################################################################
# A brute-force search agrees: the best dispatch still loses money.

best, _ = ib.grid_search_max(case, resolution=30)
print("grid max %.1f" % best)

###############################################################################
# Let the generators switch off. Now the all-zero dispatch earns exactly 0,
# so the true maximum is 0 and no certificate is possible. The interval
# bound stays positive: it pairs the largest benefit with the smallest cost
# and cannot see that they never occur together.

flexible = tuple(g.__class__(g.id, g.bus, 0.0, g.p_max - g.p_min, g.cost_curve)
                 for g in case.generators)
relaxed = case.replace(generators=flexible)
report = ib.compute_bounds(ib.build_pipeline(relaxed))
best, _ = ib.grid_search_max(relaxed, resolution=30)
print("generators may switch off: upper %.1f, grid max %.1f, certificate: %s"
      % (report.objective_upper, best, report.infeasible_certificate))
