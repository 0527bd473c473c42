"""Out-degree histograms, tail CCDFs and tail fits."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..space import ContractError


class InsufficientDataError(ValueError):
    """Too few usable CCDF points to fit a tail."""


@dataclass(frozen=True)
class DegreeHistogram:
    counts: dict
    n: int
    iteration: int | None = None

    @property
    def max_degree(self) -> int:
        return max(self.counts) if self.counts else 0

    def as_list(self) -> list:
        """Counts for degrees 0..max_degree, zeros included."""
        return [self.counts.get(k, 0) for k in range(self.max_degree + 1)]

    def edges(self) -> int:
        return sum(k * c for k, c in self.counts.items())


def degree_histogram(tree, at_iteration: int | None = None) -> DegreeHistogram:
    """Out-degree histogram of the tree as it stood after ``at_iteration``.

    Only nodes born at or before the snapshot count, and a node's degree
    counts only children that were also born by then.
    """
    births = tree.birth
    parents = tree.parents
    if at_iteration is None:
        n = len(births)
    else:
        # births are non-decreasing in id
        n = 0
        while n < len(births) and births[n] <= at_iteration:
            n += 1
    deg = [0] * n
    for i in range(1, n):
        deg[parents[i]] += 1
    return DegreeHistogram(dict(sorted(Counter(deg).items())), n, at_iteration)


def histogram_from_degrees(degrees, iteration: int | None = None) -> DegreeHistogram:
    degrees = list(degrees)
    return DegreeHistogram(dict(sorted(Counter(int(d) for d in degrees).items())), len(degrees), iteration)


@dataclass(frozen=True)
class CcdfSeries:
    """``(k, fraction of nodes with degree >= k)`` pairs."""

    points: list

    @property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.points], dtype=float)

    @property
    def fractions(self) -> np.ndarray:
        return np.array([f for _, f in self.points], dtype=float)


def ccdf(h: DegreeHistogram) -> CcdfSeries:
    if h.n < 1:
        raise ContractError("ccdf of an empty histogram")
    counts = h.as_list()
    tail = 0
    out = []
    for k in range(len(counts) - 1, -1, -1):
        tail += counts[k]
        out.append((k, tail / h.n))
    out.reverse()
    return CcdfSeries(out)


def mean_ccdf(series: list) -> CcdfSeries:
    """Pointwise mean of several CCDFs; missing high-k entries count as 0."""
    kmax = max(int(s.points[-1][0]) for s in series)
    acc = np.zeros(kmax + 1)
    for s in series:
        for k, f in s.points:
            acc[int(k)] += f
    acc /= len(series)
    return CcdfSeries([(k, float(acc[k])) for k in range(kmax + 1)])


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line through the tail.

    For ``kind == "power"`` the fit is ``log F = intercept - exponent * log k``;
    for ``kind == "exponential"`` it is ``log F = intercept - exponent * k``.
    """

    exponent: float
    intercept: float
    r_squared: float
    k_min: int
    kind: str = "power"
    n_points: int = 0


def _tail_points(c: CcdfSeries, k_min: int, k_max: int | None):
    pts = [(k, f) for k, f in c.points if k >= k_min and f > 0 and (k_max is None or k <= k_max)]
    if len(pts) < 3:
        raise InsufficientDataError(
            f"only {len(pts)} CCDF points with k >= {k_min} and non-zero tail; "
            "a larger run (more iterations or replicates) is needed"
        )
    k = np.array([p[0] for p in pts], dtype=float)
    f = np.array([p[1] for p in pts], dtype=float)
    return k, f


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple:
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    return slope, float(intercept), r2


def fit_power_law(c: CcdfSeries, k_min: int = 1, k_max: int | None = None) -> PowerLawFit:
    if k_min < 1:
        raise ContractError("k_min must be >= 1 for a log-log fit")
    k, f = _tail_points(c, k_min, k_max)
    slope, intercept, r2 = _line_fit(np.log(k), np.log(f))
    return PowerLawFit(-slope, intercept, r2, k_min, "power", len(k))


def fit_exponential_tail(c: CcdfSeries, k_min: int = 1, k_max: int | None = None) -> PowerLawFit:
    k, f = _tail_points(c, k_min, k_max)
    slope, intercept, r2 = _line_fit(k, np.log(f))
    return PowerLawFit(-slope, intercept, r2, k_min, "exponential", len(k))


@dataclass(frozen=True)
class TailReport:
    power: PowerLawFit
    exponential: PowerLawFit
    better: str = field(init=False)

    def __post_init__(self) -> None:
        kind = "power" if self.power.r_squared >= self.exponential.r_squared else "exponential"
        object.__setattr__(self, "better", kind)

    @property
    def best_r_squared(self) -> float:
        return max(self.power.r_squared, self.exponential.r_squared)


def fit_tail(c: CcdfSeries, k_min: int = 1, k_max: int | None = None) -> TailReport:
    return TailReport(fit_power_law(c, k_min, k_max), fit_exponential_tail(c, k_min, k_max))


def gamma_constant(d: int, f_d: int) -> float:
    """Per-shrink contraction factor ``(2^d f - 1) / (2^d f)`` for a cone count ``f``."""
    if d < 1 or f_d < 1:
        raise ContractError("d and f_d must be >= 1")
    m = (2 ** d) * f_d
    return (m - 1) / m


# cone counts used when the caller gives none
DEFAULT_CONE_COUNTS = {1: 2, 2: 6}


def harmonic(n: int) -> float:
    return math.fsum(1.0 / j for j in range(1, n + 1))


def pooled_counts(h: DegreeHistogram, cap: int = 5) -> list:
    """Counts for degrees ``0..cap-1`` followed by one bin for degrees ``>= cap``."""
    out = [h.counts.get(k, 0) for k in range(cap)]
    out.append(sum(c for k, c in h.counts.items() if k >= cap))
    return out


def histogram_shape(h: DegreeHistogram, cap: int = 5) -> dict:
    """Shape summary of a degree histogram.

    ``decreasing``: pooled counts are weakly decreasing. ``low_to_max_ratio``:
    nodes with degree <= 1 divided by nodes at the largest observed degree.
    """
    pooled = pooled_counts(h, cap)
    # an empty trailing pool bin is not a violation
    while len(pooled) > 1 and pooled[-1] == 0:
        pooled.pop()
    decreasing = all(b <= a for a, b in zip(pooled, pooled[1:]))
    low = h.counts.get(0, 0) + h.counts.get(1, 0)
    at_max = h.counts.get(h.max_degree, 0)
    return {
        "pooled_counts": pooled_counts(h, cap),
        "decreasing": decreasing,
        "low_to_max_ratio": low / at_max if at_max else math.inf,
        "max_degree": h.max_degree,
        "n": h.n,
        "handshake_ok": h.edges() == h.n - 1,
    }
