"""
Three flows on one link
=======================

Each source sends a control packet every interval.  Switches stamp it down
to their advertized rate on the way out, the destination sends it back,
and the source adopts the stamped rate.  The estimates reach the fair
share of 10 well inside the 4*N*D bound.
"""

from explicitrate import run
from explicitrate.scenarios import single_link

sc = single_link()
trace, report = run(sc)
epoch = report.epochs[0]

for record in trace.of_kind("est"):
    _, t, fid, value = record
    print(f"t={t!s:>4}  {fid}  estimate {value}")

print(f"\nD = {sc.d_bound}, N = {epoch.n_levels}, budget 4ND = {epoch.budget}")
print(f"converged after {epoch.convergence_time}")

###############################################################################
# Actual sending rates rise only 2D after an allocation allows it, so the
# link is never overloaded.  Switching that policy off shows the overload.

print("policy on :", report.feasibility_violations)
_, loose = run(sc, delayed_increase=False)
print("policy off:", loose.feasibility_violations)
