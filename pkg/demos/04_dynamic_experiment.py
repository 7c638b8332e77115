"""
Flows entering and leaving
==========================

Five flows with demand 70.  Flow 3 leaves at 15, flows 1 and 2 leave at 48
and flow 1 comes back at 67.  The first epoch has three bottleneck levels.
The advertized rates re-settle after every change; the plot shows them.
"""

import sys
from pathlib import Path

from explicitrate import run
from explicitrate.scenarios import dynamic_experiment

sc = dynamic_experiment()
trace, report = run(sc)

print(f"D = {sc.d_bound}")
print("epoch  start  levels  convergence  4ND  rates")
for e in report.epochs:
    rates = " ".join(f"{fid}:{r}" for fid, r in e.oracle.rates.items())
    print(f"{e.index:>5}  {e.start!s:>5}  {e.n_levels:>6}  {e.convergence_time!s:>11}  {e.budget!s:>3}  {rates}")

###############################################################################
# Plot the advertized rate of every loaded link.  A link advertizes its
# capacity until it first hears from a flow.

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is not installed; skipping the plot")

loaded = {lid for fid in sc.flows for lid in sc.crossings(fid)}
series = {lid: [(0.0, float(sc.links[lid].capacity))] for lid in loaded}
for _, t, lid, mu in trace.of_kind("mu"):
    series.setdefault(lid, []).append((float(t), float(mu)))

fig, ax = plt.subplots(figsize=(8, 4))
for lid, points in sorted(series.items()):
    xs, ys = zip(*points)
    ax.step(list(xs) + [float(sc.duration)], list(ys) + [ys[-1]], where="post", label=lid)
for e in report.epochs[1:]:
    ax.axvline(float(e.start), color="grey", lw=0.5, ls="--")
ax.set_xlabel("time")
ax.set_ylabel("advertized rate")
ax.set_ylim(0, 160)
ax.legend(fontsize="small", ncol=3)
out = Path(sys.argv[1] if len(sys.argv) > 1 else "dynamic_mu.png")
fig.savefig(out, dpi=120, bbox_inches="tight")
print(f"wrote {out}")
