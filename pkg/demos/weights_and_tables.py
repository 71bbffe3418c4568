"""Spatial weights and exit tables on a synthetic enterprise panel.

Builds a skeleton of firms in one manufacturing division, plants exits with
the spatial lag probit, and prints the yearly exit table, the firm summary
and the shape of W at the group and class levels.

    python3 demos/weights_and_tables.py
"""
import numpy as np

from spatial_exit.data import PanelDataset, exit_table, summarize
from spatial_exit.synthetic import simulate_exits, synthetic_skeleton
from spatial_exit.weights import build_weights, great_circle_km

# intercept, years, capital, foreign pct, HK/TW/US, JV, tariffed, trader
BETA = [-0.8, 0.02, -0.1, 0.1, 0.2, 0.0, -0.1, 0.2, -0.2]

records = synthetic_skeleton(n_groups=6, firms_per_group=40, seed=0)

# one degree of meridian, and the antipodes
print("1 deg meridian  %.5f km" % great_circle_km((0, 0), (0, 1)))
print("antipodes       %.4f km" % great_circle_km((0, 0), (180, 0)))

for level in ("group", "class"):
    W = build_weights(records, level)
    rows = W.toarray().sum(axis=1)
    print(f"\nW[{level}]: n={W.n} nnz={W.nnz} blocks={len(W.blocks)} "
          f"isolated={int(W.isolated.sum())} row sums in {{0,1}}: "
          f"{bool(np.all(np.isclose(rows, 1) | (rows == 0)))}")

# exits for 2018 planted on the 2017 cross-section
records, sample, design, W = simulate_exits(records, 2017, "group", 0.3, BETA, seed=1)
panel = PanelDataset(records, 2017, 2018)
print(f"\nplanted exits: {int(sample.y.sum())} of {design.n}")

table = exit_table(panel)
print("\n" + table.to_csv())

summary = summarize(panel)
for name, share in summary["categorical"].items():
    print(f"{name:<40s}{100 * share:6.2f}%")
for name, d in summary["numerical"].items():
    print(f"{name:<40s}mean {d['mean']:9.2f}  median {d['median']:9.2f}  "
          f"sd {d['sd']:9.2f}  n {d['n']}")
