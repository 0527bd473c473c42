"""State spaces, metrics, workspaces and the seeded random stream.

States are plain tuples of floats. A holonomic state is ``(x0, ..., x_{d-1})``
and a car state is ``CarState(x, y, theta)``, which is also a tuple. Every
collision query only looks at the first ``workspace.dim`` components, so a
car pose is checked as a point robot at ``(x, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


class ConfigurationError(ValueError):
    """Raised for problem setups that cannot be planned (e.g. start in collision)."""


def wrap_angle(theta: float) -> float:
    """Map an angle onto [-pi, pi)."""
    w = (theta + math.pi) % TWO_PI - math.pi
    # fmod rounding can land exactly on +pi
    if w >= math.pi:
        w -= TWO_PI
    return w


def angle_diff(a: float, b: float) -> float:
    """Length of the shortest arc between two angles, in [0, pi]."""
    d = abs(a - b) % TWO_PI
    return TWO_PI - d if d > math.pi else d


class CarState(NamedTuple):
    x: float
    y: float
    theta: float

    @classmethod
    def make(cls, x: float, y: float, theta: float) -> "CarState":
        return cls(float(x), float(y), wrap_angle(float(theta)))


State = Union[tuple, CarState]


def holonomic_state(coords: Sequence[float]) -> tuple:
    s = tuple(float(c) for c in coords)
    if not s:
        raise ContractError("a holonomic state needs at least one coordinate")
    if not all(math.isfinite(c) for c in s):
        raise ContractError(f"non-finite coordinate in {s}")
    return s


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


class EuclideanMetric:
    """Plain Euclidean distance on R^d."""

    name = "euclidean"

    def squared(self, a: Sequence[float], b: Sequence[float]) -> float:
        if len(a) != len(b):
            raise ContractError(f"dimension mismatch: {len(a)} vs {len(b)}")
        s = 0.0
        for ai, bi in zip(a, b):
            dx = ai - bi
            s += dx * dx
        return s

    def __call__(self, a: Sequence[float], b: Sequence[float]) -> float:
        return math.sqrt(self.squared(a, b))

    def squared_many(self, points: np.ndarray, q: Sequence[float]) -> np.ndarray:
        """Squared distances from every row of ``points`` to ``q``.

        The sum runs axis by axis so each entry is bit-identical to
        :meth:`squared` on the same pair.
        """
        dx = points[:, 0] - q[0]
        out = dx * dx
        for j in range(1, points.shape[1]):
            dx = points[:, j] - q[j]
            out += dx * dx
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EuclideanMetric)

    def __hash__(self) -> int:
        return hash(self.name)


@dataclass(frozen=True)
class CarMetric:
    """Weighted distance on R^2 x S^1.

    ``d^2 = dx^2 + dy^2 + theta_weight * dtheta^2`` where ``dtheta`` is the
    shortest arc between headings.
    """

    theta_weight: float = 0.1
    name: str = field(default="car", init=False)

    def __post_init__(self) -> None:
        if not self.theta_weight >= 0.0:
            raise ContractError("theta_weight must be non-negative")

    def squared(self, a: Sequence[float], b: Sequence[float]) -> float:
        if len(a) != 3 or len(b) != 3:
            raise ContractError("car metric needs (x, y, theta) states")
        dx = a[0] - b[0]
        dy = a[1] - b[1]
        dt = angle_diff(a[2], b[2])
        return dx * dx + dy * dy + self.theta_weight * (dt * dt)

    def __call__(self, a: Sequence[float], b: Sequence[float]) -> float:
        return math.sqrt(self.squared(a, b))

    def squared_many(self, points: np.ndarray, q: Sequence[float]) -> np.ndarray:
        dx = points[:, 0] - q[0]
        dy = points[:, 1] - q[1]
        dt = np.abs(points[:, 2] - q[2]) % TWO_PI
        dt = np.where(dt > math.pi, TWO_PI - dt, dt)
        return dx * dx + dy * dy + self.theta_weight * (dt * dt)


Metric = Union[EuclideanMetric, CarMetric]
EUCLIDEAN = EuclideanMetric()


def distance(a: State, b: State, metric: Metric = EUCLIDEAN) -> float:
    return metric(a, b)


# --------------------------------------------------------------------------
# Random streams
# --------------------------------------------------------------------------


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's Philox generator with the pair used as the 128-bit
    key, so draws are reproducible across platforms and distinct stream ids
    give independent sequences. Not safe to share between threads.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ContractError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def random(self) -> float:
        return float(self.generator.random())

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, n: int) -> int:
        return int(self.generator.integers(n))

    def spawn(self, stream_id: int) -> "RngStream":
        """Another stream with the same seed."""
        return RngStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


# --------------------------------------------------------------------------
# Workspace geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ContractError("disc radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, p: Sequence[float]) -> bool:
        s = 0.0
        for pi, ci in zip(p, self.center):
            d = pi - ci
            s += d * d
        return s <= self.radius * self.radius


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or not all(
            hi > lo for lo, hi in zip(self.lower, self.upper)
        ):
            raise ContractError(f"degenerate box {self.lower} .. {self.upper}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, p: Sequence[float]) -> bool:
        for pi, lo, hi in zip(p, self.lower, self.upper):
            if pi < lo or pi > hi:
                return False
        return True


Obstacle = Union[Disc, Box]


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned sampling box plus closed obstacles."""

    lower: tuple
    upper: tuple
    obstacles: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ContractError("workspace bounds need matching non-empty corners")
        if not all(hi > lo for lo, hi in zip(self.lower, self.upper)):
            raise ContractError(f"degenerate workspace bounds {self.lower} .. {self.upper}")
        for ob in self.obstacles:
            if ob.dim != self.dim:
                raise ContractError("obstacle dimension differs from workspace")

    @classmethod
    def square(cls, side: float = 1.0, dim: int = 2, obstacles=()) -> "Workspace":
        return cls((0.0,) * dim, (float(side),) * dim, tuple(obstacles))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return math.prod(hi - lo for lo, hi in zip(self.lower, self.upper))

    @property
    def default_resolution(self) -> float:
        return min(hi - lo for lo, hi in zip(self.lower, self.upper)) / 100.0

    def in_bounds(self, p: Sequence[float]) -> bool:
        for i, lo in enumerate(self.lower):
            if p[i] < lo or p[i] > self.upper[i]:
                return False
        return True


@dataclass(frozen=True)
class GoalRegion:
    center: tuple
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ContractError("goal radius must be positive")

    def contains(self, s: State, metric: Metric = EUCLIDEAN) -> bool:
        return metric(s, self.center) <= self.radius


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def sample_uniform(ws: Workspace, rng: RngStream, car: bool = False) -> State:
    """Uniform draw over the workspace box (obstacles are not rejected here)."""
    g = rng.generator
    if car:
        x, y = g.uniform(ws.lower, ws.upper)
        theta = g.uniform(-math.pi, math.pi)
        return CarState(float(x), float(y), wrap_angle(float(theta)))
    return tuple(g.uniform(ws.lower, ws.upper).tolist())


def in_free_space(s: State, ws: Workspace) -> bool:
    """True iff the position part of ``s`` is in bounds and outside every obstacle."""
    p = s[: ws.dim]
    if not ws.in_bounds(p):
        return False
    for ob in ws.obstacles:
        if ob.contains(p):
            return False
    return True


def segment_collides(a: State, b: State, ws: Workspace, resolution: float | None = None) -> bool:
    """Check the straight segment between the positions of ``a`` and ``b``.

    Both endpoints and evenly spaced interior points no further apart than
    ``resolution`` are tested with :func:`in_free_space`.
    """
    if resolution is None:
        resolution = ws.default_resolution
    if not resolution > 0:
        raise ContractError("resolution must be positive")
    k = ws.dim
    pa = a[:k]
    pb = b[:k]
    length = math.sqrt(sum((u - v) * (u - v) for u, v in zip(pa, pb)))
    steps = max(1, math.ceil(length / resolution))
    if not ws.obstacles:
        # the box is convex, so the endpoints decide
        return not (ws.in_bounds(pa) and ws.in_bounds(pb))
    for i in range(steps + 1):
        t = i / steps
        p = tuple(u + t * (v - u) for u, v in zip(pa, pb))
        if not in_free_space(p, ws):
            return True
    return False
