"""Experiment drivers built on the planner and the Voronoi/degree tools."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..planner import HolonomicSystem, PlannerConfig, Tree, build_rrt, extend
from ..space import EUCLIDEAN, ContractError, GoalRegion, RngStream, Workspace
from .degrees import DegreeHistogram, degree_histogram
from .voronoi import voronoi_areas_exact, voronoi_volumes_mc


# --------------------------------------------------------------------------
# degree snapshots
# --------------------------------------------------------------------------


def degree_snapshots(ws: Workspace, cfg: PlannerConfig, checkpoints: Sequence[int], rng: RngStream) -> dict:
    """One exploration run up to the last checkpoint; histograms at each checkpoint.

    A snapshot at K equals a separate K-iteration run with the same stream,
    because the run never stops early.
    """
    checkpoints = sorted(int(k) for k in checkpoints)
    run_cfg = _replace(cfg, iterations=checkpoints[-1], stop_on_goal=False)
    result = build_rrt(ws, None, run_cfg, rng)
    return {k: degree_histogram(result.tree, k) for k in checkpoints}


def _replace(cfg: PlannerConfig, **kw) -> PlannerConfig:
    return replace(cfg, **kw)


# --------------------------------------------------------------------------
# selection bias
# --------------------------------------------------------------------------


@dataclass
class SelectionBiasReport:
    n_nodes: int
    window: int
    backend: str
    frequencies: np.ndarray
    volumes: np.ndarray
    correlation: float
    volume_method: str


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; NaN when either side has no variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return math.nan
    xc, yc = x - x.mean(), y - y.mean()
    den = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if den == 0.0:
        return math.nan
    return float((xc * yc).sum()) / den


def selection_bias_experiment(
    ws: Workspace,
    rng: RngStream,
    n_nodes: int = 200,
    window: int = 2000,
    backend: str = "linear",
    eps: float = 0.05,
    start: Sequence[float] | None = None,
    grow: bool = False,
    volume_method: str = "exact",
    mc_samples: int = 100_000,
) -> SelectionBiasReport:
    """Correlate how often each vertex is picked for expansion with its Voronoi volume.

    A holonomic tree is grown to ``n_nodes`` vertices; cell volumes of those
    vertices are measured; then ``window`` more samples are drawn and the
    vertex chosen for each is recorded. With ``grow`` the tree keeps
    extending during the window (a tree-growth run), otherwise the window
    only queries the frozen tree.
    """
    if n_nodes < 1 or window < 1:
        raise ContractError("n_nodes and window must be >= 1")
    if start is None:
        start = tuple((lo + hi) / 2 for lo, hi in zip(ws.lower, ws.upper))
    cfg = PlannerConfig(start=tuple(start), iterations=1, system=HolonomicSystem(eps),
                        stop_on_goal=False, nn_backend=backend)
    nn_rng = rng.spawn(rng.stream_id ^ 0x5DEECE66D) if backend == "random" else None
    tree = Tree(cfg.start, EUCLIDEAN, backend, nn_rng)
    g = rng.generator
    lower, upper = np.asarray(ws.lower), np.asarray(ws.upper)
    it = 0
    guard = 1000 * n_nodes
    while len(tree) < n_nodes:
        it += 1
        if it > guard:
            raise ContractError("tree stopped growing before reaching n_nodes")
        extend(tree, tuple(g.uniform(lower, upper).tolist()), ws, cfg, rng, None, it)
    pts = np.array(tree.states[:n_nodes])
    if volume_method == "exact":
        vols = voronoi_areas_exact(pts, ws)
    else:
        vols = np.array([e.volume_fraction for e in voronoi_volumes_mc(pts, ws, mc_samples, rng)])

    counts = np.zeros(n_nodes, dtype=np.int64)
    cfg = _replace(cfg, record_selections=True)
    for _ in range(window):
        it += 1
        x_rand = tuple(g.uniform(lower, upper).tolist())
        if grow:
            extend(tree, x_rand, ws, cfg, rng, None, it)
            near = tree.selections[-1]
        else:
            near = tree.nearest(x_rand)
        if near < n_nodes:
            counts[near] += 1
    freqs = counts / window
    return SelectionBiasReport(n_nodes, window, backend, freqs, vols, pearson(freqs, vols), volume_method)


# --------------------------------------------------------------------------
# cost convergence
# --------------------------------------------------------------------------


def straight_line_optimum(start: Sequence[float], goal: GoalRegion) -> float:
    """Optimal cost to an Euclidean goal ball in an obstacle-free box."""
    d = math.dist(tuple(start), tuple(goal.center))
    return max(0.0, d - goal.radius)


@dataclass
class CostSeries:
    checkpoints: list
    best_costs: list
    c_star: float
    status: str
    n_nodes: int
    best_cost_trace: list = field(default_factory=list)

    @property
    def relative_gaps(self) -> list:
        return [(y - self.c_star) / self.c_star if math.isfinite(y) else math.inf for y in self.best_costs]

    def is_monotone(self) -> bool:
        ys = self.best_costs
        return all(b <= a for a, b in zip(ys, ys[1:]))


def cost_convergence_experiment(
    ws: Workspace,
    goal: GoalRegion,
    cfg: PlannerConfig,
    checkpoints: Sequence[int],
    rng: RngStream,
) -> CostSeries:
    """Run to the last checkpoint without stopping and record Y_n at each checkpoint.

    Assumes an obstacle-free workspace so that the optimum is the straight
    line to the goal ball.
    """
    if ws.obstacles:
        raise ContractError("cost convergence needs an obstacle-free workspace for c*")
    if cfg.is_car:
        raise ContractError("cost convergence is defined for the holonomic system")
    checkpoints = sorted(int(k) for k in checkpoints)
    run_cfg = _replace(cfg, iterations=checkpoints[-1], stop_on_goal=False)
    res = build_rrt(ws, goal, run_cfg, rng)
    ys = [res.best_cost_at(k) for k in checkpoints]
    return CostSeries(checkpoints, ys, straight_line_optimum(cfg.start, goal), res.status,
                      len(res.tree), list(res.best_cost_trace))


# --------------------------------------------------------------------------
# 1/n check
# --------------------------------------------------------------------------


def chi_square_uniform(counts: Sequence[int]) -> tuple:
    """Chi-square statistic and p-value of counts against equal cell probabilities."""
    from scipy.stats import chi2

    counts = np.asarray(counts, dtype=float)
    expected = counts.sum() / len(counts)
    stat = float(((counts - expected) ** 2 / expected).sum())
    return stat, float(chi2.sf(stat, len(counts) - 1))


def pooled_histogram(hists: Sequence[DegreeHistogram]) -> DegreeHistogram:
    counts: dict = {}
    for h in hists:
        for k, c in h.counts.items():
            counts[k] = counts.get(k, 0) + c
    return DegreeHistogram(dict(sorted(counts.items())), sum(h.n for h in hists), hists[0].iteration)
