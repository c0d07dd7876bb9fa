"""Declarative scenario files, run metrics, and trajectory CSV export."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import gp
from .gp import GPTrajectory
from .kinematics import ChainModel, load_model, manipulability


class ConfigError(ValueError):
    """Invalid or inconsistent scenario description."""


@dataclass
class GPConfig:
    Qc_scale: float = 1e5
    T: float = 10.0
    num_support: int = 11
    # "psd": Qc = Qc_scale * I is the power spectral density.
    # "inverse": Qc_scale is its inverse, i.e. Qc = I / Qc_scale.
    Qc_convention: str = "psd"

    def psd_scale(self) -> float:
        return self.Qc_scale if self.Qc_convention == "psd" else 1.0 / self.Qc_scale


@dataclass
class FixedState:
    index: int
    sigma: float = 1e3


@dataclass
class FactorConfig:
    sigma_s: float = 1e-4
    c: float | None = None  # defaults to 0.01 * m_max
    sigma_obs: float = 1e2
    eps: float = 0.3
    sigma_theta_anchor: float = 1e-3
    fix_endpoints: bool = True
    sigma_goal: float = 1e-6
    manipulability: bool = True
    interpolated: bool = True
    fixed_states: list[FixedState] = field(default_factory=list)


@dataclass
class SolverConfig:
    max_iters: int = 100
    tol_rel: float = 1e-5
    tol_abs: float = 1e-12
    lm_damping_init: float = 1e-4
    lm_damping_max: float = 1e12
    lm_factor: float = 10.0
    damping_mode: str = "marquardt"
    interp_per_interval: int = 9


@dataclass
class IKConfig:
    num_solutions: int = 20
    seed: int = 0
    pos_tol: float = 1e-4
    max_iters: int = 200
    damping: float = 0.1
    max_restarts: int = 400


@dataclass
class SDFConfig:
    cell_size: float = 0.02
    bounds: list[list[float]] = field(default_factory=lambda: [[-1.6, -1.6, -0.6], [1.6, 1.6, 1.8]])


@dataclass
class BenchmarkConfig:
    n_runs: int = 50
    dt: float = 0.02
    vel_limit: float = math.pi / 3
    k_values: list[int] = field(default_factory=lambda: [1, 5, 10, 20])
    min_start_m: float = 1e-4
    tracker_gain: float = 0.5
    nullspace_gain: float = 1.0
    tracker_tol: float = 1e-3
    tracker_timeout: float = 30.0
    damping_eps: float = 0.05
    damping_max: float = 0.1


@dataclass
class Waypoint:
    index: int
    value: list[float]


@dataclass
class ScenarioConfig:
    robot: str
    goal_type: str
    goal_value: list[float]
    start: list[float] | str = "random"
    name: str = "scenario"
    gp: GPConfig = field(default_factory=GPConfig)
    factors: FactorConfig = field(default_factory=FactorConfig)
    obstacles: list[dict] = field(default_factory=list)
    sdf: SDFConfig = field(default_factory=SDFConfig)
    waypoints: list[Waypoint] = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)
    ik: IKConfig = field(default_factory=IKConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    seed: int = 0
    sample_hz: float = 50.0
    m_max_samples: int = 100_000
    base_dir: str = "."

    def robot_path(self) -> Path:
        return resolve_data_path(self.robot, "robots", self.base_dir)

    def load_robot(self) -> ChainModel:
        return load_model(self.robot_path())


def _section(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def _positive(value, what):
    if not (isinstance(value, (int, float)) and value > 0):
        raise ConfigError(f"{what} must be positive, got {value!r}")


def scenario_from_dict(d: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a JSON object")
    known = {"name", "robot", "start", "goal", "gp", "factors", "obstacles", "sdf", "waypoints",
             "solver", "ik", "benchmark", "seed", "sample_hz", "m_max_samples"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "robot" not in d:
        raise ConfigError("scenario needs a 'robot' entry")
    goal = d.get("goal")
    if not isinstance(goal, dict) or set(goal) != {"type", "value"}:
        raise ConfigError("goal must be {type: 'configuration'|'position', value: [...]}")
    if goal["type"] not in ("configuration", "position"):
        raise ConfigError(f"unknown goal type {goal['type']!r}")
    factors = dict(d.get("factors") or {})
    fixed = [_section(FixedState, f, "factors.fixed_states[]") for f in factors.pop("fixed_states", [])]
    fc = _section(FactorConfig, factors, "factors")
    fc.fixed_states = fixed
    cfg = ScenarioConfig(
        robot=d["robot"],
        goal_type=goal["type"],
        goal_value=[float(v) for v in goal["value"]],
        start=d.get("start", "random"),
        name=d.get("name", "scenario"),
        gp=_section(GPConfig, d.get("gp"), "gp"),
        factors=fc,
        obstacles=list(d.get("obstacles", [])),
        sdf=_section(SDFConfig, d.get("sdf"), "sdf"),
        waypoints=[_section(Waypoint, w, "waypoints[]") for w in d.get("waypoints", [])],
        solver=_section(SolverConfig, d.get("solver"), "solver"),
        ik=_section(IKConfig, d.get("ik"), "ik"),
        benchmark=_section(BenchmarkConfig, d.get("benchmark"), "benchmark"),
        seed=int(d.get("seed", 0)),
        sample_hz=float(d.get("sample_hz", 50.0)),
        m_max_samples=int(d.get("m_max_samples", 100_000)),
        base_dir=str(base_dir),
    )
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    _positive(cfg.gp.Qc_scale, "gp.Qc_scale")
    _positive(cfg.gp.T, "gp.T")
    if cfg.gp.Qc_convention not in ("psd", "inverse"):
        raise ConfigError("gp.Qc_convention must be 'psd' or 'inverse'")
    if cfg.gp.num_support < 2:
        raise ConfigError("gp.num_support must be >= 2")
    for name in ("sigma_s", "sigma_obs", "sigma_theta_anchor", "sigma_goal"):
        _positive(getattr(cfg.factors, name), f"factors.{name}")
    if cfg.factors.c is not None:
        _positive(cfg.factors.c, "factors.c")
    if cfg.factors.eps < 0:
        raise ConfigError("factors.eps must be nonnegative")
    for fs in cfg.factors.fixed_states:
        if not 0 <= fs.index < cfg.gp.num_support:
            raise ConfigError(f"fixed state index {fs.index} out of range")
        _positive(fs.sigma, "fixed_states[].sigma")
    if cfg.goal_type == "position" and len(cfg.goal_value) != 3:
        raise ConfigError("a position goal needs 3 coordinates")
    if not (isinstance(cfg.start, list) or cfg.start == "random"):
        raise ConfigError("start must be a configuration list or 'random'")
    if cfg.solver.interp_per_interval < 0 or cfg.solver.max_iters < 0:
        raise ConfigError("solver counts must be nonnegative")
    if cfg.solver.damping_mode not in ("identity", "marquardt"):
        raise ConfigError("solver.damping_mode must be 'identity' or 'marquardt'")
    if cfg.solver.lm_factor <= 1:
        raise ConfigError("solver.lm_factor must exceed 1")
    if cfg.ik.num_solutions < 1:
        raise ConfigError("ik.num_solutions must be >= 1")
    _positive(cfg.ik.pos_tol, "ik.pos_tol")
    if not cfg.robot_path().exists():
        raise ConfigError(f"robot file not found: {cfg.robot}")


def check_against_model(cfg: ScenarioConfig, model: ChainModel) -> None:
    n = model.n
    if cfg.goal_type == "configuration" and len(cfg.goal_value) != n:
        raise ConfigError(f"configuration goal has {len(cfg.goal_value)} entries, robot has {n} joints")
    if isinstance(cfg.start, list) and len(cfg.start) != n:
        raise ConfigError(f"start has {len(cfg.start)} entries, robot has {n} joints")
    for w in cfg.waypoints:
        if len(w.value) != n or not 0 < w.index < cfg.gp.num_support - 1:
            raise ConfigError(f"bad waypoint at index {w.index}")
    if cfg.obstacles and not model.collision_spheres:
        raise ConfigError("obstacles given but the robot has no collision spheres")


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = resolve_data_path(str(path), "scenarios", ".")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return scenario_from_dict(data, base_dir=Path(path).parent)


def data_dir(kind: str) -> Path:
    return Path(str(resources.files("manipgp") / "data" / kind))


def resolve_data_path(name: str, kind: str, base_dir: str | Path) -> Path:
    """Paths are tried as given, relative to ``base_dir``, then among bundled files."""
    p = Path(name)
    for cand in (p, Path(base_dir) / p, data_dir(kind) / p, data_dir(kind) / f"{name}.json"):
        if cand.exists():
            return cand
    return Path(base_dir) / p


# -- metrics -----------------------------------------------------------------


@dataclass
class RunMetrics:
    manip: dict
    velocity: dict
    time: dict
    solved: bool
    iterations: int

    def to_dict(self) -> dict:
        return asdict(self)


def profile_metrics(m: np.ndarray, qdot: np.ndarray) -> tuple[dict, dict]:
    vinf = np.abs(qdot).max(axis=1) if qdot.size else np.zeros(len(m))
    manip = {"avg": float(np.mean(m)), "min": float(np.min(m)), "max": float(np.max(m))}
    vel = {"max": float(vinf.max()), "avg": float(vinf.mean())}
    return manip, vel


def sample_times(params: gp.GPParams, dt: float) -> np.ndarray:
    k = int(round(params.total_time / dt))
    t = np.linspace(0.0, params.total_time, k + 1)
    return t


def trajectory_profile(model: ChainModel, traj: GPTrajectory, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense samples ``(t, states, m)`` of a trajectory at spacing ``dt``."""
    t = sample_times(traj.params, dt)
    X = gp.sample(traj, t)
    m = manipulability(model, X[:, : model.n]).m
    return t, X, m


def smoothness_cost(traj: GPTrajectory) -> float:
    return gp.prior_cost(traj)


def write_trajectory_csv(path: str | Path, t: np.ndarray, X: np.ndarray, m: np.ndarray) -> None:
    n = X.shape[1] // 2
    header = ["t"] + [f"q{k + 1}" for k in range(n)] + [f"dq{k + 1}" for k in range(n)] + ["m"]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in np.column_stack([t, X, m]):
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:-1], data[:, -1]


def dump_json(obj, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
