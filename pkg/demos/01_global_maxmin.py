"""
Global maxmin-fair rates
========================

The oracle peels bottlenecks one level at a time: the link with the least
capacity per weighted flow fixes the rate of every flow crossing it, the
fixed load is subtracted everywhere, and the procedure repeats.
"""

from fractions import Fraction

from explicitrate import compute_maxmin, verify_maxmin
from explicitrate.output import format_oracle
from explicitrate.scenarios import chain, feedback_pair, finite_demand

###############################################################################
# Two bottleneck levels.  A and B share a->b (10); C gets what is left of
# b->c (100) after B.

print(format_oracle(compute_maxmin(chain())))

###############################################################################
# Feedback traffic counts too.  With k = 2, B's feedback on x->y costs twice
# B's rate, so x->y carries A + 2B = 30 and both flows settle at 10.

print(format_oracle(compute_maxmin(feedback_pair(k=2))))

###############################################################################
# A finite demand acts as a private link.  A wants only 5, so B and C split
# the other 25.

print(format_oracle(compute_maxmin(finite_demand())))

###############################################################################
# The verifier is independent of the solver.  It rejects an infeasible
# vector and a feasible one that could be made fairer.

sc = chain()
for rates in ({"A": 5, "B": 6, "C": 94}, {"A": 4, "B": 6, "C": 94}):
    cx = verify_maxmin(sc, {k: Fraction(v) for k, v in rates.items()})
    print(rates, "->", cx.kind, "|", cx.detail)
