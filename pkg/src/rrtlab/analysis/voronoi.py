"""Voronoi cell volumes: exact 2-D polygons and Monte Carlo estimates.

Volumes are reported as fractions of the workspace volume. Cells are taken
with respect to the Euclidean metric unless a metric is passed to the
Monte Carlo routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..space import EUCLIDEAN, CarMetric, ContractError, RngStream, Workspace


# --------------------------------------------------------------------------
# exact 2-D cells
# --------------------------------------------------------------------------


def polygon_area(poly: Sequence) -> float:
    """Shoelace area of a simple polygon given as ``[(x, y), ...]``."""
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return abs(s) * 0.5


def clip_halfplane(poly: list, nx: float, ny: float, c: float) -> list:
    """Keep the part of a convex polygon where ``nx*x + ny*y <= c``."""
    out = []
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        va = nx * ax + ny * ay - c
        vb = nx * bx + ny * by - c
        if va <= 0.0:
            out.append((ax, ay))
        if (va < 0.0 < vb) or (vb < 0.0 < va):
            t = va / (va - vb)
            out.append((ax + t * (bx - ax), ay + t * (by - ay)))
    return out


def clip_bisector(poly: list, p: Sequence[float], q: Sequence[float]) -> list:
    """Part of ``poly`` at least as close to ``p`` as to ``q``."""
    nx, ny = q[0] - p[0], q[1] - p[1]
    c = 0.5 * ((q[0] * q[0] + q[1] * q[1]) - (p[0] * p[0] + p[1] * p[1]))
    return clip_halfplane(poly, nx, ny, c)


def inside_convex(poly: list, q: Sequence[float]) -> bool:
    """Point-in-convex-polygon for a counter-clockwise vertex list."""
    n = len(poly)
    if n < 3:
        return False
    qx, qy = q[0], q[1]
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        if (bx - ax) * (qy - ay) - (by - ay) * (qx - ax) < 0.0:
            return False
    return True


def _box_polygon(lower: Sequence[float], upper: Sequence[float]) -> list:
    x0, y0 = lower
    x1, y1 = upper
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _reach(poly: list, p: Sequence[float]) -> float:
    return max(math.hypot(x - p[0], y - p[1]) for x, y in poly) if poly else 0.0


def voronoi_cell(points: np.ndarray, i: int, lower: Sequence[float], upper: Sequence[float]) -> list:
    """Exact Voronoi cell of ``points[i]`` clipped to the box, as a CCW polygon.

    Coincident points follow the smallest-id rule: the later copy gets an
    empty cell.
    """
    pts = np.asarray(points, dtype=float)
    p = pts[i]
    d2 = ((pts - p) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    poly = _box_polygon(lower, upper)
    reach = _reach(poly, p)
    for j in order.tolist():
        if j == i:
            continue
        if d2[j] == 0.0:
            if j < i:
                return []
            continue
        # a site further than twice the cell radius cannot cut the cell
        if math.sqrt(d2[j]) > 2.0 * reach:
            break
        poly = clip_bisector(poly, p, pts[j])
        if not poly:
            return []
        reach = _reach(poly, p)
    return poly


def voronoi_areas_exact(points: np.ndarray, ws: Workspace) -> np.ndarray:
    """Exact cell areas of 2-D points as fractions of the workspace area."""
    if ws.dim != 2:
        raise ContractError("exact Voronoi areas are only available in 2-D")
    pts = np.asarray(points, dtype=float)[:, :2]
    return np.array(
        [polygon_area(voronoi_cell(pts, i, ws.lower, ws.upper)) for i in range(len(pts))]
    ) / ws.volume


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VoronoiEstimate:
    node: int
    volume_fraction: float
    stderr: float
    mc_samples: int


def _sample_states(ws: Workspace, m: int, rng: RngStream, car: bool) -> np.ndarray:
    g = rng.generator
    xy = g.uniform(ws.lower, ws.upper, size=(m, ws.dim))
    if car:
        th = g.uniform(-math.pi, math.pi, size=(m, 1))
        return np.hstack([xy, th])
    return xy


def nearest_ids(points: np.ndarray, samples: np.ndarray, metric=EUCLIDEAN, chunk: int = 4096) -> np.ndarray:
    """Index of the nearest point for every sample; ties go to the smallest index."""
    points = np.asarray(points, dtype=float)
    out = np.empty(len(samples), dtype=np.int64)
    # bound the (chunk x n) distance matrix to a few million entries
    step = max(1, min(chunk, 4_000_000 // max(1, len(points))))
    for lo in range(0, len(samples), step):
        s = samples[lo : lo + step]
        if isinstance(metric, CarMetric):
            dx = s[:, None, 0] - points[None, :, 0]
            dy = s[:, None, 1] - points[None, :, 1]
            dt = np.abs(s[:, None, 2] - points[None, :, 2]) % (2 * math.pi)
            dt = np.where(dt > math.pi, 2 * math.pi - dt, dt)
            d2 = dx * dx + dy * dy + metric.theta_weight * (dt * dt)
        else:
            diff = s[:, None, 0] - points[None, :, 0]
            d2 = diff * diff
            for j in range(1, points.shape[1]):
                diff = s[:, None, j] - points[None, :, j]
                d2 += diff * diff
        out[lo : lo + step] = np.argmin(d2, axis=1)
    return out


def voronoi_volumes_mc(
    points: Sequence,
    ws: Workspace,
    mc_samples: int,
    rng: RngStream,
    metric=EUCLIDEAN,
) -> list:
    """Monte Carlo Voronoi volume fractions.

    Every uniform workspace sample is attributed to its nearest point, so
    the fractions sum to one exactly. For the car metric the heading is
    sampled uniformly as well.
    """
    if mc_samples < 1:
        raise ContractError("mc_samples must be >= 1")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or not len(pts):
        raise ContractError("need a non-empty (n, d) point array")
    car = isinstance(metric, CarMetric)
    samples = _sample_states(ws, mc_samples, rng, car)
    counts = np.bincount(nearest_ids(pts, samples, metric), minlength=len(pts))
    frac = counts / mc_samples
    se = np.sqrt(frac * (1.0 - frac) / mc_samples)
    return [VoronoiEstimate(i, float(frac[i]), float(se[i]), mc_samples) for i in range(len(pts))]


# --------------------------------------------------------------------------
# decay under pure insertion
# --------------------------------------------------------------------------


@dataclass
class DecayTrace:
    """Volume history of tracked cells while uniform points are inserted.

    ``steps[j]`` is the insertion count after the j-th recorded point and
    ``volumes[j + 1]`` the tracked fractions right after it (row 0 is the
    start). With the exact method only points that can touch a tracked cell
    are recorded; volumes are constant in between.
    """

    tracked_ids: tuple
    steps: np.ndarray
    volumes: np.ndarray
    stderr: np.ndarray
    landed: np.ndarray
    n_inserted: int
    method: str
    points: np.ndarray | None = field(default=None, repr=False)

    def volume_at(self, insertion: int) -> np.ndarray:
        j = int(np.searchsorted(self.steps, insertion, side="right"))
        return self.volumes[j]

    def event_rows(self, t: int) -> np.ndarray:
        """Row indices into ``volumes`` right after each landing in tracked cell ``t``."""
        return np.flatnonzero(self.landed == t) + 1

    def event_volumes(self, t: int, k_max: int) -> np.ndarray:
        """Volume after 0..k_max landings in cell ``t``; NaN past the last landing."""
        rows = self.event_rows(t)
        out = np.full(k_max + 1, np.nan)
        out[0] = self.volumes[0, t]
        m = min(k_max, len(rows))
        out[1 : m + 1] = self.volumes[rows[:m], t]
        return out

    def event_count(self, t: int) -> int:
        return int((self.landed == t).sum())


def voronoi_decay_experiment(
    ws: Workspace,
    n_max: int,
    rng: RngStream,
    initial: np.ndarray | None = None,
    tracked_ids: Sequence[int] = (0,),
    mc_samples: int = 0,
    method: str = "exact",
    stop_after_events: int | None = None,
) -> DecayTrace:
    """Insert uniform points one at a time and follow the tracked cells.

    Parameters
    ----------
    initial : (n0, d) array of starting points; defaults to one uniform point.
    tracked_ids : indices into ``initial`` whose cells are followed.
    method : ``"exact"`` (2-D only) clips polygons and draws the waiting time
        until the next point that can reach a tracked cell, so ``n_max`` may
        be astronomically large. ``"mc"`` keeps every point and re-estimates
        the tracked fractions with ``mc_samples`` fresh samples per insertion.
    stop_after_events : stop once every tracked cell has received this many
        insertions.
    """
    g = rng.generator
    if initial is None:
        initial = g.uniform(ws.lower, ws.upper, size=(1, ws.dim))
    initial = np.asarray(initial, dtype=float)
    tracked = tuple(int(t) for t in tracked_ids)
    if not tracked or any(not 0 <= t < len(initial) for t in tracked):
        raise ContractError("tracked ids must index the initial points")
    if method == "exact":
        if ws.dim != 2:
            raise ContractError("the exact method needs a 2-D workspace; use method='mc'")
        return _decay_exact(ws, n_max, rng, initial, tracked, stop_after_events)
    if method == "mc":
        if mc_samples < 1:
            raise ContractError("the mc method needs mc_samples >= 1")
        return _decay_mc(ws, n_max, rng, initial, tracked, mc_samples, stop_after_events)
    raise ContractError(f"unknown method {method!r}")


def _decay_exact(ws, n_max, rng, initial, tracked, stop_after_events) -> DecayTrace:
    g = rng.generator
    area = ws.volume
    sites = [tuple(initial[t]) for t in tracked]
    polys = [voronoi_cell(initial, t, ws.lower, ws.upper) for t in tracked]
    vols = [[polygon_area(p) / area for p in polys]]
    steps, landed = [], []
    events = [0] * len(tracked)
    inserted = 0
    (x0, y0), (x1, y1) = ws.lower, ws.upper
    while True:
        if stop_after_events is not None and min(events) >= stop_after_events:
            break
        # box covering every disc of radius 2*reach around a tracked site
        bx0, by0, bx1, by1 = x1, y1, x0, y0
        for s, poly in zip(sites, polys):
            r = 2.0 * _reach(poly, s)
            bx0, by0 = min(bx0, s[0] - r), min(by0, s[1] - r)
            bx1, by1 = max(bx1, s[0] + r), max(by1, s[1] + r)
        bx0, by0, bx1, by1 = max(bx0, x0), max(by0, y0), min(bx1, x1), min(by1, y1)
        p_hit = (bx1 - bx0) * (by1 - by0) / area
        if p_hit <= 0.0:
            break
        wait = int(g.geometric(min(1.0, p_hit))) if p_hit < 1.0 else 1
        if inserted + wait > n_max:
            inserted = n_max
            break
        inserted += wait
        q = (float(g.uniform(bx0, bx1)), float(g.uniform(by0, by1)))
        hit = -1
        for t, (s, poly) in enumerate(zip(sites, polys)):
            if hit < 0 and inside_convex(poly, q):
                hit = t
            polys[t] = clip_bisector(poly, s, q)
        if hit >= 0:
            events[hit] += 1
        steps.append(inserted)
        landed.append(hit)
        vols.append([polygon_area(p) / area for p in polys])
    v = np.array(vols, dtype=float)
    return DecayTrace(tracked, np.array(steps, dtype=np.int64), v, np.zeros_like(v),
                      np.array(landed, dtype=np.int64), inserted, "exact")


def _decay_mc(ws, n_max, rng, initial, tracked, mc_samples, stop_after_events) -> DecayTrace:
    g = rng.generator
    pts = [np.asarray(p, dtype=float) for p in initial]
    tracked_arr = np.array(tracked)

    def estimate(points):
        samples = g.uniform(ws.lower, ws.upper, size=(mc_samples, ws.dim))
        ids = nearest_ids(np.array(points), samples)
        frac = np.array([(ids == t).sum() for t in tracked_arr]) / mc_samples
        return frac, np.sqrt(frac * (1.0 - frac) / mc_samples)

    f0, s0 = estimate(pts)
    vols, errs = [f0], [s0]
    steps, landed = [], []
    events = [0] * len(tracked)
    for step in range(1, n_max + 1):
        if stop_after_events is not None and min(events) >= stop_after_events:
            break
        q = g.uniform(ws.lower, ws.upper)
        near = int(nearest_ids(np.array(pts), q[None, :])[0])
        hit = tracked.index(near) if near in tracked else -1
        if hit >= 0:
            events[hit] += 1
        pts.append(q)
        f, s = estimate(pts)
        steps.append(step)
        landed.append(hit)
        vols.append(f)
        errs.append(s)
    return DecayTrace(tracked, np.array(steps, dtype=np.int64), np.array(vols), np.array(errs),
                      np.array(landed, dtype=np.int64), len(steps), "mc", np.array(pts))
