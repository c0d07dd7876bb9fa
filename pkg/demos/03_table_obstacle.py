"""Passing over a table while keeping the arm well conditioned.

A waypoint at the fifth support state lifts the path over a box obstacle.
Collision factors keep every link sphere at least eps from the table, and
manipulability factors placed between support states protect the motion
that the support states alone do not see.
"""

# %%
from manipgp import gp
from manipgp.factors import collision_cost
from manipgp.kinematics import forward_kinematics
from manipgp.pipeline import build_field, plan
from manipgp.scenario import load_scenario, trajectory_profile

cfg = load_scenario("scenario_vb")
sdf = build_field(cfg)
dense = plan(cfg, sdf=sdf, interpolated=True)
sparse = plan(cfg, sdf=sdf, interpolated=False)
model = dense.graph.model


def clearance(Q):
    """Smallest gap between any link sphere surface and the table."""
    gaps = []
    for q in Q:
        F = forward_kinematics(model, q)
        for s in model.collision_spheres:
            centre = F[s.link, :3, :3] @ s.center + F[s.link, :3, 3]
            gaps.append(sdf.query(centre)[0][0] - s.radius)
    return min(gaps)


# %%
for label, res in (("initial", dense.init), ("support only", sparse.trajectory), ("interpolated", dense.trajectory)):
    _, _, m = trajectory_profile(model, res, 0.02)
    Q = gp.sample(res, gp.dense_times(res.params, 9))[:, :model.n]
    hinge = collision_cost(model, sdf, Q, cfg.factors.eps).costs.sum()
    print(f"{label:13s} min m {m.min():.5f}   mean m {m.mean():.4f}   "
          f"clearance {clearance(Q):+.3f} m   collision cost {hinge:.2e}")
