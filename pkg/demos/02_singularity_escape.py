"""Leaving a near-singular start with the GP planner.

The start configuration has an almost straight elbow. A straight joint-space
line to the goal drags the arm through poorly conditioned poses; adding the
manipulability factor bends the trajectory away from them. Raising the
manipulability covariance weakens that pull and gives a smoother path.
"""

# %%
import numpy as np

from manipgp.pipeline import plan, with_overrides
from manipgp.scenario import load_scenario, trajectory_profile

cfg = load_scenario("scenario_va")
base = plan(cfg)
model = base.graph.model

# %% Manipulability along the straight line and along the optimized path, once per second.
t, _, m_init = trajectory_profile(model, base.init, 1.0)
_, _, m_opt = trajectory_profile(model, base.trajectory, 1.0)
print(" t [s]   straight line   optimized")
for ti, a, b in zip(t, m_init, m_opt):
    print(f"{ti:5.1f}   {a:13.4f}   {b:9.4f}")
print(f"\nmean m: {base.init_metrics.manip['avg']:.4f} -> {base.metrics.manip['avg']:.4f} "
      f"in {base.report.iterations} iterations, {1e3 * base.report.wall_time:.0f} ms")

# %% Trade-off between manipulability and smoothness.
print("\nsigma_s    mean m    smoothness cost")
for s in (1e-4, 2e-4, 3e-4):
    r = plan(with_overrides(cfg, factors={"sigma_s": s}), model=model)
    print(f"{s:.0e}    {r.metrics.manip['avg']:.4f}    {r.smoothness:.3e}")
