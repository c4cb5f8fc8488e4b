"""A random walk piles its experience into a few regions of the state space.

A uniformly random policy on a 10x10 grid starts every episode in the same
corner and is cut off after 50 steps, so cells near the start are visited
far more often than the far side.  Clustering the stored states and
ranking clusters by size shows the skew that uniform replay inherits.

    python3 demos/03_gridworld_skew.py
"""
import numpy as np

from distreplay.harness.config import build_config
from distreplay.harness.experiment import collect_random
from distreplay.harness.reports import cluster_report, top_share

cfg = build_config({}, {"env": "gridworld"})
buffer, index = collect_random(cfg, 100_000, 100_000, seed=0)
rows = cluster_report(index)

print(f"{len(buffer)} transitions in {len(rows)} nonempty {cfg.clusterer} clusters")
print(f"largest cluster  {rows[0].share:6.1%}")
print(f"median cluster   {rows[len(rows) // 2].share:6.1%}")
print(f"smallest cluster {rows[-1].share:6.1%}")
print(f"top 20% of clusters hold {top_share(rows):.1%} of all transitions")

# Visit counts per cell, drawn as a coarse heat map.
cells = buffer.states().astype(int)
visits = np.zeros((10, 10), dtype=int)
np.add.at(visits, (cells[:, 0], cells[:, 1]), 1)
shades = " .:-=+*#%@"
scale = visits.max()
print("\nvisits per cell (start top left, goal bottom right is never a stored state):")
for row in visits:
    print("  " + "".join(shades[min(9, int(9 * v / scale + 0.999))] * 2 for v in row))
