"""Randomized reaching: the planner against two velocity-level controllers.

Each run draws a random non-singular start, asks for a fixed end-effector
position, and compares
  * the planner with and without interpolated factors,
  * damped least squares tracking,
  * pseudo-inverse tracking with manipulability ascent in the null space.
Pass a run count on the command line; the full benchmark uses 50.
"""

# %%
import sys

from manipgp.pipeline import benchmark
from manipgp.scenario import load_scenario

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = load_scenario("scenario_vc")
report, rows, timings = benchmark(cfg, runs)

# %%
print(f"{'method':16s} {'avg m':>7s} {'min m':>7s} {'max vel':>8s} {'solved':>7s} {'time [s]':>9s}")
for name, row in report["methods"].items():
    print(f"{name:16s} {row['manip']['avg']:7.4f} {row['manip']['min']:7.4f} {row['velocity']['max']:8.3f} "
          f"{row['solved']:4d}/{runs:<2d} {timings['mean'][name]['total']:9.2f}")

# %% More IK candidates give the initializer more straight lines to choose from.
print("\nIK candidates  avg m")
for k, v in report["k_sweep"].items():
    print(f"{k:>13s}  {v:.4f}")
