"""RRT construction for holonomic and car systems.

The tree is append-only and stored column-wise; :class:`TreeNode` is a
read-only view built on demand.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .dynamics import CarModel, ControlInput, IntegrationSpec, best_input, holonomic_step, random_input
from .nn import NnIndex
from .space import (
    EUCLIDEAN,
    CarMetric,
    CarState,
    ConfigurationError,
    ContractError,
    GoalRegion,
    RngStream,
    Workspace,
    in_free_space,
    sample_uniform,
    segment_collides,
)


@dataclass(frozen=True)
class HolonomicSystem:
    eps: float = 0.05

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ContractError("eps must be positive")


@dataclass(frozen=True)
class CarSystem:
    model: CarModel = field(default_factory=CarModel)
    ispec: IntegrationSpec = field(default_factory=IntegrationSpec)
    theta_weight: float = 0.1
    input_selection: str = "best"

    def __post_init__(self) -> None:
        if self.input_selection not in ("best", "random"):
            raise ContractError("input_selection must be 'best' or 'random'")

    @property
    def metric(self) -> CarMetric:
        return CarMetric(self.theta_weight)


System = Union[HolonomicSystem, CarSystem]


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs for :func:`build_rrt`.

    ``iterations`` counts sampling attempts, rejected ones included.
    """

    start: tuple
    iterations: int = 1000
    goal_bias: float = 0.0
    system: System = field(default_factory=HolonomicSystem)
    stop_on_goal: bool = True
    nn_backend: str = "linear"
    collision_resolution: Optional[float] = None
    repeat_extend: bool = False
    record_selections: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ContractError("goal_bias must lie in [0, 1]")
        if self.iterations < 1:
            raise ContractError("iterations must be >= 1")

    @property
    def is_car(self) -> bool:
        return isinstance(self.system, CarSystem)

    @property
    def metric(self):
        return self.system.metric if self.is_car else EUCLIDEAN


@dataclass(frozen=True)
class TreeNode:
    id: int
    state: tuple
    parent: Optional[int]
    control: Optional[ControlInput]
    out_degree: int
    birth_iteration: int
    cost: float


class Tree:
    """Rooted, append-only tree with parent links and out-degree counters."""

    def __init__(self, root: Sequence[float], metric=EUCLIDEAN, nn_backend: str = "linear", rng: RngStream | None = None):
        self.metric = metric
        self.states: list = []
        self.parents: list = []
        self.controls: list = []
        self.out_degree: list = []
        self.birth: list = []
        self.cost: list = []
        self.selections: list = []
        # controls already applied from each vertex (car trees only)
        self.used_controls: dict = {}
        self.index = NnIndex(nn_backend, dim=len(root), metric=metric, rng=rng)
        self._append(tuple(root), -1, None, 0, 0.0)

    def __len__(self) -> int:
        return len(self.states)

    def _append(self, state, parent: int, control, iteration: int, cost: float) -> int:
        nid = len(self.states)
        self.states.append(state)
        self.parents.append(parent)
        self.controls.append(control)
        self.out_degree.append(0)
        self.birth.append(iteration)
        self.cost.append(cost)
        self.index.insert(nid, state)
        return nid

    def add_child(self, parent: int, state, control, iteration: int, edge_cost: float) -> int:
        nid = self._append(state, parent, control, iteration, self.cost[parent] + edge_cost)
        self.out_degree[parent] += 1
        if control is not None:
            self.used_controls.setdefault(parent, set()).add(control)
        return nid

    def node(self, nid: int) -> TreeNode:
        if not 0 <= nid < len(self.states):
            raise ContractError(f"unknown node id {nid}")
        p = self.parents[nid]
        return TreeNode(
            nid, self.states[nid], None if p < 0 else p, self.controls[nid],
            self.out_degree[nid], self.birth[nid], self.cost[nid],
        )

    def nearest(self, q) -> int:
        return self.index.nearest(q)

    def to_csv(self) -> str:
        return tree_to_csv(self)


@dataclass
class PlanResult:
    tree: Tree
    status: str  # "reached" | "exhausted"
    goal_node: Optional[int]
    iterations_used: int
    extensions_attempted: int
    extensions_rejected: int
    goal_nodes: list = field(default_factory=list)
    # (iteration, best cost) each time Y_n improves
    best_cost_trace: list = field(default_factory=list)

    @property
    def best_cost(self) -> float:
        return self.best_cost_trace[-1][1] if self.best_cost_trace else math.inf

    def best_cost_at(self, iteration: int) -> float:
        """Y_n: cheapest goal-reaching cost found within the first ``iteration`` iterations."""
        y = math.inf
        for it, c in self.best_cost_trace:
            if it > iteration:
                break
            y = c
        return y


@dataclass(frozen=True)
class ExtendOutcome:
    status: str  # "extended" | "reached" | "rejected"
    node: Optional[int] = None


def _steer(tree: Tree, near: int, x_rand, cfg: PlannerConfig, rng: RngStream):
    """New state, edge control and the sub-states to collision check."""
    s_near = tree.states[near]
    sys_ = cfg.system
    if isinstance(sys_, HolonomicSystem):
        new = holonomic_step(s_near, x_rand, sys_.eps)
        return new, None, [s_near, new]
    if sys_.input_selection == "best":
        u, traj = best_input(sys_.model, s_near, x_rand, sys_.ispec, sys_.metric)
    else:
        u, traj = random_input(sys_.model, s_near, sys_.ispec, rng)
    return traj[-1], u, [s_near] + traj


def _path_free(points: list, ws: Workspace, resolution: float) -> bool:
    for a, b in zip(points, points[1:]):
        if segment_collides(a, b, ws, resolution):
            return False
    return True


def _edge_length(points: list, metric) -> float:
    # length of the stored edge: metric distance between its endpoints
    return metric(points[0], points[-1])


def extend(
    tree: Tree,
    x_rand,
    ws: Workspace,
    cfg: PlannerConfig,
    rng: RngStream,
    goal: GoalRegion | None = None,
    iteration: int = 0,
) -> ExtendOutcome:
    """One Extend step: nearest vertex, steer, check ``x_new`` and its edge, append.

    Rejection leaves the tree untouched. A car control already applied from
    the chosen vertex is rejected, since it would reproduce an existing
    child. With ``cfg.repeat_extend`` the step is repeated from each new
    vertex toward the same sample until it stops making progress or
    collides; the outcome reports the last vertex added.
    """
    resolution = cfg.collision_resolution or ws.default_resolution
    metric = tree.metric
    near = tree.nearest(x_rand)
    if cfg.record_selections:
        tree.selections.append(near)
    outcome = ExtendOutcome("rejected")
    while True:
        new, u, pts = _steer(tree, near, x_rand, cfg, rng)
        if u is not None and u in tree.used_controls.get(near, ()):
            # same vertex and control would duplicate an existing child
            return outcome
        if not in_free_space(new, ws) or not _path_free(pts, ws, resolution):
            return outcome
        nid = tree.add_child(near, new, u, iteration, _edge_length(pts, metric))
        if goal is not None and goal.contains(new, metric):
            return ExtendOutcome("reached", nid)
        outcome = ExtendOutcome("extended", nid)
        if not cfg.repeat_extend:
            return outcome
        d_before = metric(tree.states[near], x_rand)
        d_after = metric(new, x_rand)
        if d_after == 0.0 or d_after >= d_before:
            return outcome
        near = nid


def build_rrt(
    ws: Workspace,
    goal: GoalRegion | None,
    cfg: PlannerConfig,
    rng: RngStream,
) -> PlanResult:
    """Grow an RRT from ``cfg.start`` for at most ``cfg.iterations`` samples.

    With ``goal_bias`` the goal center is sampled instead of a uniform state.
    When ``stop_on_goal`` is false the run continues to the iteration limit
    and keeps every goal-region vertex, so ``best_cost_trace`` follows Y_n.
    ``goal`` may be None for pure exploration runs.
    """
    car = cfg.is_car
    metric = cfg.metric
    start = CarState.make(*cfg.start) if car else tuple(float(c) for c in cfg.start)
    if car and ws.dim != 2:
        raise ConfigurationError("the car system needs a 2-D workspace")
    if not car and len(start) != ws.dim:
        raise ConfigurationError(f"start has {len(start)} coordinates, workspace has {ws.dim}")
    if not in_free_space(start, ws):
        raise ConfigurationError(f"start {start} is not in free space")
    if goal is not None and cfg.goal_bias > 0 and len(goal.center) != len(start):
        raise ConfigurationError("goal center and start differ in dimension")

    nn_rng = rng.spawn(rng.stream_id ^ 0x9E3779B97F4A7C15) if cfg.nn_backend == "random" else None
    tree = Tree(start, metric, cfg.nn_backend, nn_rng)
    result = PlanResult(tree, "exhausted", None, 0, 0, 0)

    if goal is not None and goal.contains(start, metric):
        result.goal_nodes.append(0)
        result.best_cost_trace.append((0, 0.0))
        if cfg.stop_on_goal:
            result.status, result.goal_node = "reached", 0
            return result

    goal_center = tuple(goal.center) if goal is not None else None
    g = rng.generator
    lower, upper = np.asarray(ws.lower), np.asarray(ws.upper)
    for it in range(1, cfg.iterations + 1):
        if goal_center is not None and cfg.goal_bias > 0 and g.random() < cfg.goal_bias:
            x_rand = goal_center
        else:
            x_rand = sample_uniform(ws, rng, car) if car else tuple(g.uniform(lower, upper).tolist())
        n_before = len(tree)
        out = extend(tree, x_rand, ws, cfg, rng, goal, it)
        result.iterations_used = it
        result.extensions_attempted += 1
        if out.status == "rejected":
            result.extensions_rejected += 1
            continue
        if goal is not None:
            for nid in range(n_before, len(tree)):
                if goal.contains(tree.states[nid], metric):
                    result.goal_nodes.append(nid)
                    if tree.cost[nid] < result.best_cost:
                        result.best_cost_trace.append((it, tree.cost[nid]))
        if out.status == "reached":
            if result.goal_node is None:
                result.goal_node = out.node
            result.status = "reached"
            if cfg.stop_on_goal:
                break
    if result.goal_nodes:
        result.status = "reached"
        if not cfg.stop_on_goal:
            # report the cheapest goal vertex once the full budget is spent
            result.goal_node = min(result.goal_nodes, key=lambda i: (tree.cost[i], i))
    return result


def extract_path(tree: Tree, leaf: int) -> list:
    """Root-to-leaf list of ``(state, control)``; the root's control is None."""
    if not 0 <= leaf < len(tree):
        raise ContractError(f"unknown node id {leaf}")
    out = []
    nid = leaf
    while nid >= 0:
        out.append((tree.states[nid], tree.controls[nid]))
        nid = tree.parents[nid]
    out.reverse()
    return out


def path_cost(path: list, metric=EUCLIDEAN) -> float:
    """Sum of metric distances between successive states of a path.

    Accepts either bare states or the ``(state, control)`` pairs returned by
    :func:`extract_path`.
    """
    if not path:
        raise ContractError("empty path")
    states = [p[0] if len(p) == 2 and isinstance(p[0], tuple) else p for p in path]
    total = 0.0
    for a, b in zip(states, states[1:]):
        total += metric(a, b)
    return total


# --------------------------------------------------------------------------
# Serialisation
# --------------------------------------------------------------------------


def tree_columns(tree: Tree) -> list:
    dim = len(tree.states[0])
    cols = ["id", "parent_id", "birth_iteration", "out_degree"]
    if isinstance(tree.metric, CarMetric):
        cols += ["x", "y", "theta", "v", "phi"]
    else:
        cols += [f"x{i}" for i in range(dim)]
    return cols


def tree_to_csv(tree: Tree) -> str:
    """One row per node; root parent is -1; control cells are empty for the root.

    Floats are written with ``repr`` so the file round-trips exactly.
    """
    car = isinstance(tree.metric, CarMetric)
    buf = io.StringIO()
    buf.write(",".join(tree_columns(tree)) + "\n")
    for i, s in enumerate(tree.states):
        row = [str(i), str(tree.parents[i]), str(tree.birth[i]), str(tree.out_degree[i])]
        row += [repr(float(c)) for c in s]
        if car:
            u = tree.controls[i]
            row += ["", ""] if u is None else [repr(u.v), repr(u.phi)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
