"""Manipulability-aware trajectory planning with a sparse Gaussian-process prior.

Trajectories are represented by a few support states of a constant-velocity
GP; planning is MAP estimation over those states with factors that reward
manipulability, penalize obstacle proximity and pin the start and goal.
"""

__version__ = "0.1.0"

from .gp import GPParams, GPTrajectory, interpolate, make_constant_velocity_prior, sample
from .kinematics import (
    ChainModel,
    ModelError,
    forward_kinematics,
    jacobian,
    load_model,
    manipulability,
    manipulability_gradient,
    planar_chain,
)
from .pipeline import benchmark, plan
from .scenario import ConfigError, ScenarioConfig, load_scenario, scenario_from_dict
from .solver import FactorGraph, SolverOptions, assemble, solve

__all__ = [
    "ChainModel",
    "ConfigError",
    "FactorGraph",
    "GPParams",
    "GPTrajectory",
    "ModelError",
    "ScenarioConfig",
    "SolverOptions",
    "__version__",
    "assemble",
    "benchmark",
    "forward_kinematics",
    "interpolate",
    "jacobian",
    "load_model",
    "load_scenario",
    "make_constant_velocity_prior",
    "manipulability",
    "manipulability_gradient",
    "plan",
    "planar_chain",
    "sample",
    "scenario_from_dict",
    "solve",
]
