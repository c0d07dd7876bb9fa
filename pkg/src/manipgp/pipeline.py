"""End-to-end planning runs and the randomized reaching benchmark."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import gp
from .baselines import TrackerOptions, run_tracker
from .gp import GPParams, GPTrajectory
from .initialization import IKOptions, best_initialization, ik_candidates
from .kinematics import ChainModel, ee_position, ensure_m_max, manipulability
from .scenario import (
    ConfigError,
    RunMetrics,
    ScenarioConfig,
    check_against_model,
    profile_metrics,
    smoothness_cost,
    trajectory_profile,
)
from .solver import FactorGraph, SolveReport, assemble, solve, solver_options
from .workspace import build_sdf, parse_obstacles

log = logging.getLogger(__name__)

CONFIG_GOAL_TOL = 0.05  # rad per joint
POSITION_GOAL_TOL = 1e-3  # m


def prepare_model(cfg: ScenarioConfig, model: ChainModel | None = None) -> ChainModel:
    model = model if model is not None else cfg.load_robot()
    check_against_model(cfg, model)
    return ensure_m_max(model, cfg.m_max_samples, cfg.seed)


def gp_params(cfg: ScenarioConfig, n: int) -> GPParams:
    return GPParams.isotropic(n, cfg.gp.psd_scale(), cfg.gp.T, cfg.gp.num_support)


def build_field(cfg: ScenarioConfig):
    if not cfg.obstacles:
        return None
    try:
        prims = parse_obstacles(cfg.obstacles)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad obstacle description: {exc}") from exc
    return build_sdf(prims, cfg.sdf.bounds, cfg.sdf.cell_size)


def ik_options(cfg: ScenarioConfig, num_solutions: int | None = None, seed: int | None = None) -> IKOptions:
    ik = cfg.ik
    return IKOptions(
        num_solutions=num_solutions or ik.num_solutions,
        max_iters=ik.max_iters,
        pos_tol=ik.pos_tol,
        damping=ik.damping,
        seed=ik.seed if seed is None else seed,
        max_restarts=ik.max_restarts,
    )


def random_start(model: ChainModel, rng: np.random.Generator, min_m: float, max_tries: int = 10_000) -> np.ndarray:
    """Rejection-sample an in-limit configuration with manipulability above ``min_m``."""
    for _ in range(max_tries):
        q = rng.uniform(model.lower, model.upper)
        if manipulability(model, q).m > min_m:
            return q
    raise RuntimeError("could not sample a non-singular start configuration")


def goal_reached(cfg: ScenarioConfig, model: ChainModel, traj: GPTrajectory) -> bool:
    qN = traj.theta[-1]
    if cfg.goal_type == "configuration":
        return bool(np.all(np.abs(qN - np.asarray(cfg.goal_value)) < CONFIG_GOAL_TOL))
    return bool(np.linalg.norm(ee_position(model, qN) - np.asarray(cfg.goal_value)) < POSITION_GOAL_TOL)


@dataclass
class PlanResult:
    init: GPTrajectory
    trajectory: GPTrajectory
    report: SolveReport
    graph: FactorGraph
    metrics: RunMetrics
    init_metrics: RunMetrics
    smoothness: float
    init_time: float


def initial_trajectory(cfg: ScenarioConfig, model: ChainModel, start: np.ndarray, params: GPParams,
                       ik: IKOptions | None = None) -> GPTrajectory:
    N = params.num_support - 1
    if cfg.goal_type == "configuration":
        goal = np.asarray(cfg.goal_value, dtype=float)
        if cfg.waypoints:
            pts = [start] + [np.asarray(w.value, dtype=float) for w in cfg.waypoints] + [goal]
            idx = [0] + [w.index for w in cfg.waypoints] + [N]
            return gp.make_waypoint_prior(pts, idx, params)
        return gp.make_constant_velocity_prior(start, goal, params)
    res = best_initialization(model, start, cfg.goal_value, params, ik or ik_options(cfg),
                              per_interval=max(cfg.solver.interp_per_interval, 1))
    return res.trajectory


def _metrics(model, traj, dt, solved, iterations, times) -> RunMetrics:
    _, X, m = trajectory_profile(model, traj, dt)
    manip, vel = profile_metrics(m, X[:, model.n:])
    return RunMetrics(manip, vel, times, solved, iterations)


def plan(cfg: ScenarioConfig, model: ChainModel | None = None, sdf=None, *, start=None,
         interpolated: bool | None = None, init: GPTrajectory | None = None) -> PlanResult:
    """Initialize, assemble and solve one scenario."""
    model = prepare_model(cfg, model)
    params = gp_params(cfg, model.n)
    if sdf is None:
        sdf = build_field(cfg)
    if start is None:
        if cfg.start == "random":
            start = random_start(model, np.random.default_rng(cfg.seed), cfg.benchmark.min_start_m)
        else:
            start = np.asarray(cfg.start, dtype=float)
    t0 = time.perf_counter()
    if init is None:
        init = initial_trajectory(cfg, model, start, params)
    init_time = time.perf_counter() - t0
    graph = assemble(cfg, model, init, sdf, interpolated=interpolated)
    traj, report = solve(graph, init, solver_options(cfg))
    dt = 1.0 / cfg.sample_hz
    times = {"total": init_time + report.wall_time, "opt": report.wall_time, "init": init_time}
    solved = report.converged and goal_reached(cfg, model, traj)
    metrics = _metrics(model, traj, dt, solved, report.iterations, times)
    init_metrics = _metrics(model, init, dt, True, 0, {"total": init_time, "opt": 0.0, "init": init_time})
    return PlanResult(init, traj, report, graph, metrics, init_metrics, smoothness_cost(traj), init_time)


# -- benchmark ---------------------------------------------------------------

PLANNER_ROWS = ("planner_intp", "planner_no_intp")
BASELINE_ROWS = ("dls", "nullspace")


def _planner_run(cfg, model, start, init, interpolated, dt, init_time):
    graph = assemble(cfg, model, init, None, interpolated=interpolated)
    traj, report = solve(graph, init, solver_options(cfg))
    _, X, m = trajectory_profile(model, traj, dt)
    manip, vel = profile_metrics(m, X[:, model.n:])
    solved = report.converged and goal_reached(cfg, model, traj)
    return {"manip": manip, "velocity": vel, "solved": bool(solved), "iterations": report.iterations}, {
        "total": init_time + report.wall_time, "opt": report.wall_time, "init": init_time}


def benchmark_run(cfg: ScenarioConfig, model: ChainModel, run: int) -> tuple[dict, dict]:
    """One randomized start: planner with/without interpolation, K sweep, two baselines."""
    bc = cfg.benchmark
    rng = np.random.default_rng([cfg.seed, run])
    start = random_start(model, rng, bc.min_start_m)
    params = gp_params(cfg, model.n)
    per_interval = max(cfg.solver.interp_per_interval, 1)
    k_main = cfg.ik.num_solutions
    k_all = max([k_main, *bc.k_values])
    ik_seed = int(rng.integers(2**31))

    t0 = time.perf_counter()
    cands = ik_candidates(model, cfg.goal_value, ik_options(cfg, k_all, ik_seed))
    if len(cands) == 0:
        raise RuntimeError("goal position is unreachable")
    init = best_initialization(model, start, cfg.goal_value, params, candidates=cands[:k_main],
                               per_interval=per_interval).trajectory
    init_time = time.perf_counter() - t0

    rows, timings = {}, {}
    for name, interp in (("planner_intp", True), ("planner_no_intp", False)):
        rows[name], timings[name] = _planner_run(cfg, model, start, init, interp, bc.dt, init_time)

    sweep = {}
    for K in sorted(set(bc.k_values)):
        if K == k_main:
            sweep[str(K)] = rows["planner_intp"]["manip"]["avg"]
            continue
        initK = best_initialization(model, start, cfg.goal_value, params, candidates=cands[:K],
                                    per_interval=per_interval).trajectory
        sweep[str(K)] = _planner_run(cfg, model, start, initK, True, bc.dt, 0.0)[0]["manip"]["avg"]
    rows["k_sweep"] = sweep

    topts = TrackerOptions(dt=bc.dt, gain=bc.tracker_gain, damping_eps=bc.damping_eps, damping_max=bc.damping_max,
                           nullspace_gain=bc.nullspace_gain, vel_limit=bc.vel_limit, tol=bc.tracker_tol,
                           timeout=bc.tracker_timeout)
    for policy in BASELINE_ROWS:
        tr = run_tracker(model, start, cfg.goal_value, topts, policy)
        rows[policy] = tr.metrics()
        timings[policy] = {"total": tr.wall_time, "opt": tr.wall_time, "init": 0.0}
    rows["start"] = start.tolist()
    rows["num_candidates"] = int(len(cands))
    return rows, timings


def _mean(values):
    return float(np.mean(values))


def aggregate(runs: list[dict], vel_limit: float) -> dict:
    report = {"n_runs": len(runs), "methods": {}}
    for name in PLANNER_ROWS + BASELINE_ROWS:
        rs = [r[name] for r in runs]
        report["methods"][name] = {
            "manip": {k: _mean([r["manip"][k] for r in rs]) for k in ("avg", "min", "max")},
            "velocity": {k: _mean([r["velocity"][k] for r in rs]) for k in ("max", "avg")},
            "velocity_peak": float(max(r["velocity"]["max"] for r in rs)),
            "within_vel_limit": int(sum(r["velocity"]["max"] < vel_limit for r in rs)),
            "solved": int(sum(r["solved"] for r in rs)),
        }
    ks = sorted(runs[0]["k_sweep"], key=int)
    report["k_sweep"] = {k: _mean([r["k_sweep"][k] for r in runs]) for k in ks}
    return report


def aggregate_timings(timings: list[dict]) -> dict:
    names = timings[0].keys()
    return {name: {k: _mean([t[name][k] for t in timings]) for k in ("total", "opt", "init")} for name in names}


def _worker(args):
    cfg, model, run = args
    return benchmark_run(cfg, model, run)


def benchmark(cfg: ScenarioConfig, n_runs: int | None = None, jobs: int = 1, model: ChainModel | None = None):
    """Run the randomized benchmark; returns ``(report, per_run_rows, timings)``.

    ``report`` and ``per_run_rows`` contain no wall-clock quantities and are
    reproducible bit for bit from ``cfg.seed``; timings are returned apart.
    """
    if cfg.goal_type != "position":
        raise ConfigError("the reaching benchmark needs a position goal")
    n_runs = cfg.benchmark.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ConfigError("n_runs must be >= 1")
    model = prepare_model(cfg, model)
    work = [(cfg, model, r) for r in range(n_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_worker, work))
    else:
        results = [_worker(w) for w in work]
    runs = [r for r, _ in results]
    timings = [t for _, t in results]
    report = aggregate(runs, cfg.benchmark.vel_limit)
    report["scenario"] = cfg.name
    report["seed"] = cfg.seed
    return report, runs, {"mean": aggregate_timings(timings), "runs": timings}


def with_overrides(cfg: ScenarioConfig, **sections) -> ScenarioConfig:
    """Copy of ``cfg`` with fields of nested sections replaced, e.g. ``factors={"sigma_s": 2e-4}``."""
    out = replace(cfg)
    for name, values in sections.items():
        setattr(out, name, replace(getattr(cfg, name), **values) if isinstance(values, dict) else values)
    return out
