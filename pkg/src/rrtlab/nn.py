"""Nearest-neighbour indices over the growing tree.

Three backends share one contract: ids are dense insertion indices and
``nearest`` returns the id minimising the squared metric, smallest id on
ties. ``random`` ignores the query and returns a uniform id.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .space import EUCLIDEAN, ContractError, EuclideanMetric, RngStream

BACKENDS = ("linear", "kdtree", "random")


class _PointArray:
    """Append-only float64 array with amortised growth."""

    def __init__(self, dim: int, capacity: int = 1024):
        self._data = np.empty((capacity, dim), dtype=np.float64)
        self.n = 0

    def append(self, s: Sequence[float]) -> None:
        if self.n == len(self._data):
            grown = np.empty((2 * len(self._data), self._data.shape[1]), dtype=np.float64)
            grown[: self.n] = self._data[: self.n]
            self._data = grown
        self._data[self.n] = s
        self.n += 1

    @property
    def view(self) -> np.ndarray:
        return self._data[: self.n]


class KdTree:
    """Static k-d tree over a point array with leaf buckets.

    Built once; the index in :class:`NnIndex` rebuilds it in bulk. Queries
    return the lexicographically smallest ``(squared distance, id)`` so the
    answer matches a linear scan bit for bit.
    """

    def __init__(self, points: np.ndarray, ids: np.ndarray | None = None, leaf_size: int = 24):
        n, dim = points.shape
        self.dim = dim
        self.leaf_size = leaf_size
        if ids is None:
            ids = np.arange(n)
        order = np.arange(n)
        # flat node arrays; leaves store [start, end) into the permuted order
        self._axis: list[int] = []
        self._split: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._start: list[int] = []
        self._end: list[int] = []
        if n:
            self._build(points, order, 0, n, 0)
        self._coords = [tuple(row) for row in points[order].tolist()]
        self._ids = ids[order].tolist()
        self.size = n

    def _new_node(self) -> int:
        for arr in (self._axis, self._left, self._right, self._start, self._end):
            arr.append(-1)
        self._split.append(0.0)
        return len(self._axis) - 1

    def _build(self, points: np.ndarray, order: np.ndarray, lo: int, hi: int, depth: int) -> int:
        node = self._new_node()
        if hi - lo <= self.leaf_size:
            self._start[node], self._end[node] = lo, hi
            return node
        sub = points[order[lo:hi]]
        axis = int(np.argmax(sub.max(axis=0) - sub.min(axis=0)))
        mid = (hi - lo) // 2
        part = np.argpartition(sub[:, axis], mid)
        order[lo:hi] = order[lo:hi][part]
        split = float(points[order[lo + mid], axis])
        # left holds coords <= split, right holds coords >= split
        self._axis[node] = axis
        self._split[node] = split
        left = self._build(points, order, lo, lo + mid, depth + 1)
        right = self._build(points, order, lo + mid, hi, depth + 1)
        self._left[node], self._right[node] = left, right
        return node

    def nearest(self, q: Sequence[float], best_d: float = math.inf, best_id: int = -1) -> tuple:
        """Return ``(squared distance, id)``; starts from an optional incumbent."""
        if not self.size:
            return best_d, best_id
        axis_, split_, left_, right_ = self._axis, self._split, self._left, self._right
        start_, end_, coords, ids = self._start, self._end, self._coords, self._ids
        dim = self.dim
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound > best_d:
                continue
            while True:
                axis = axis_[node]
                if axis < 0:
                    for i in range(start_[node], end_[node]):
                        p = coords[i]
                        d2 = 0.0
                        for j in range(dim):
                            dx = p[j] - q[j]
                            d2 += dx * dx
                        if d2 < best_d or (d2 == best_d and ids[i] < best_id):
                            best_d, best_id = d2, ids[i]
                    break
                diff = q[axis] - split_[node]
                plane = diff * diff
                if diff <= 0.0:
                    near, far = left_[node], right_[node]
                else:
                    near, far = right_[node], left_[node]
                # equal bounds are kept: a tie on the far side may carry a smaller id
                if plane <= best_d:
                    stack.append((far, plane))
                node = near
        return best_d, best_id


class NnIndex:
    """Append-only nearest-neighbour index.

    Parameters
    ----------
    backend : {"linear", "kdtree", "random"}
    metric : metric object with ``squared_many``; the k-d tree needs Euclidean
        and silently uses the linear scan otherwise.
    rng : RngStream, required for the ``random`` backend.
    rebuild_factor : the k-d tree is rebuilt when the unindexed buffer holds
        more than ``rebuild_factor * sqrt(n)`` points.
    """

    def __init__(
        self,
        backend: str = "linear",
        dim: int = 2,
        metric=EUCLIDEAN,
        rng: RngStream | None = None,
        rebuild_factor: float = 16.0,
    ):
        if backend not in BACKENDS:
            raise ContractError(f"unknown nn backend {backend!r}; expected one of {BACKENDS}")
        if backend == "random" and rng is None:
            raise ContractError("the random backend needs an RngStream")
        self.backend = backend
        self.metric = metric
        self.rng = rng
        self.dim = dim
        self._points = _PointArray(dim)
        self._use_tree = backend == "kdtree" and isinstance(metric, EuclideanMetric)
        self._tree: KdTree | None = None
        self._tree_size = 0
        self.rebuild_factor = rebuild_factor

    def __len__(self) -> int:
        return self._points.n

    @property
    def points(self) -> np.ndarray:
        return self._points.view

    def insert(self, node_id: int, s: Sequence[float]) -> None:
        if node_id != self._points.n:
            raise ContractError(f"non-dense id {node_id}; expected {self._points.n}")
        if len(s) != self.dim:
            raise ContractError(f"dimension mismatch: {len(s)} vs {self.dim}")
        self._points.append(s)
        if self._use_tree:
            n = self._points.n
            # bulk rebuild once the linear-scan buffer outgrows c*sqrt(n)
            if n - self._tree_size > max(16.0, self.rebuild_factor * math.sqrt(n)):
                self._tree = KdTree(self._points.view.copy())
                self._tree_size = n

    def nearest(self, q: Sequence[float]) -> int:
        n = self._points.n
        if n == 0:
            raise ContractError("nearest() on an empty index")
        if self.backend == "random":
            return self.rng.integers(n)
        if self._use_tree:
            return self._nearest_tree(q)
        d2 = self.metric.squared_many(self._points.view, q)
        # argmin returns the first minimum, i.e. the smallest id
        return int(np.argmin(d2))

    def _nearest_tree(self, q: Sequence[float]) -> int:
        best_d, best_id = math.inf, -1
        if self._tree is not None:
            best_d, best_id = self._tree.nearest(q)
        m = self._tree_size
        n = self._points.n
        if n > m:
            d2 = self.metric.squared_many(self._points.view[m:], q)
            j = int(np.argmin(d2))
            # buffered ids are all larger than tree ids
            if d2[j] < best_d:
                best_id = m + j
        return best_id


def nearest_probability_trial(n: int, d: int, trials: int, rng: RngStream, chunk: int = 20000) -> np.ndarray:
    """Empirical probability that the i-th of n uniform points is nearest to a fresh point.

    Each trial draws n i.i.d. points in the unit cube plus a query point and
    records the index of the nearest one; returns per-index frequencies.
    """
    if n < 1 or trials < 1 or d < 1:
        raise ContractError("n, d and trials must be >= 1")
    counts = np.zeros(n, dtype=np.int64)
    g = rng.generator
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        pts = g.random((m, n, d))
        q = g.random((m, 1, d))
        diff = pts - q
        d2 = diff[..., 0] * diff[..., 0]
        for j in range(1, d):
            d2 += diff[..., j] * diff[..., j]
        counts += np.bincount(np.argmin(d2, axis=1), minlength=n)
        done += m
    return counts / trials
