"""Rapidly-exploring random trees with degree and Voronoi-bias analysis."""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import CarModel, ControlInput, IntegrationSpec, best_input, holonomic_step, propagate
from .nn import KdTree, NnIndex
from .planner import (
    CarSystem,
    HolonomicSystem,
    PlannerConfig,
    PlanResult,
    Tree,
    build_rrt,
    extend,
    extract_path,
    path_cost,
)
from .space import (
    EUCLIDEAN,
    Box,
    CarMetric,
    ConfigurationError,
    ContractError,
    Disc,
    EuclideanMetric,
    GoalRegion,
    RngStream,
    Workspace,
    distance,
    in_free_space,
    sample_uniform,
    segment_collides,
)

__all__ = [
    "__version__",
    "Box", "CarMetric", "CarModel", "CarSystem", "ConfigurationError", "ContractError", "ControlInput",
    "Disc", "EUCLIDEAN", "EuclideanMetric", "GoalRegion", "HolonomicSystem", "IntegrationSpec", "KdTree",
    "NnIndex", "PlanResult", "PlannerConfig", "RngStream", "Tree", "Workspace", "best_input", "build_rrt",
    "distance", "extend", "extract_path", "holonomic_step", "in_free_space", "path_cost", "propagate",
    "sample_uniform", "segment_collides",
]
