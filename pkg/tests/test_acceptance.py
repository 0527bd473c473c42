"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import chisquare

from rrtlab.analysis import (
    ccdf,
    cost_convergence_experiment,
    degree_histogram,
    degree_snapshots,
    fit_tail,
    gamma_constant,
    histogram_shape,
    selection_bias_experiment,
    straight_line_optimum,
    voronoi_areas_exact,
    voronoi_decay_experiment,
    voronoi_volumes_mc,
)
from rrtlab.dynamics import CarModel, IntegrationSpec
from rrtlab.nn import NnIndex, nearest_probability_trial
from rrtlab.planner import CarSystem, HolonomicSystem, PlannerConfig, build_rrt
from rrtlab.runner import execute
from rrtlab.space import Box, Disc, GoalRegion, RngStream, Workspace

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}")

    return emit


def test_criterion_1_degree_histogram_shape(report):
    ws = Workspace.square(20.0)
    model = CarModel()
    cfg = PlannerConfig((10.0, 10.0, 0.0), system=CarSystem(model, IntegrationSpec()), stop_on_goal=False)
    t0 = time.perf_counter()
    snaps = degree_snapshots(ws, cfg, [5000, 10000, 15000, 20000], RngStream(0, 0))
    elapsed = time.perf_counter() - t0
    failures, parts = [], []
    for k, h in snaps.items():
        s = histogram_shape(h)
        parts.append(f"K={k} pooled={s['pooled_counts']}")
        if not s["decreasing"]:
            failures.append(f"K={k} not weakly decreasing")
        if s["low_to_max_ratio"] < 10:
            failures.append(f"K={k} low/max ratio {s['low_to_max_ratio']:.1f} < 10")
        if s["max_degree"] > len(model.controls):
            failures.append(f"K={k} max degree {s['max_degree']} > |U|")
        if not s["handshake_ok"]:
            failures.append(f"K={k} handshake")
    if elapsed > 120:
        failures.append(f"runtime {elapsed:.0f}s")
    ok = not failures
    report(1, ok, f"{'; '.join(parts)}; {elapsed:.1f}s" + ("" if ok else f"; failed: {', '.join(failures)}"))
    assert ok, failures


def test_criterion_2_tail_fit(report):
    ws = Workspace.square(1.0)
    cfg = PlannerConfig((0.5, 0.5), iterations=20000, system=HolonomicSystem(0.05), stop_on_goal=False)
    fits = []
    for seed in range(10):
        tree = build_rrt(ws, None, cfg, RngStream(seed, 0)).tree
        fits.append(fit_tail(ccdf(degree_histogram(tree)), 1))
    slope = float(np.mean([-f.power.exponent for f in fits]))
    r2_pow = float(np.mean([f.power.r_squared for f in fits]))
    r2_exp = float(np.mean([f.exponential.r_squared for f in fits]))
    ok = slope < 0 and max(r2_pow, r2_exp) >= 0.9
    report(2, ok, f"log-log slope {slope:.3f}, power r2 {r2_pow:.3f}, exponential r2 {r2_exp:.3f} "
                  f"(mean of 10 seeds; either fit >= 0.9 accepted)")
    assert ok


def test_criterion_3_one_over_n(report):
    t0 = time.perf_counter()
    f = nearest_probability_trial(10, 2, 100_000, RngStream(0, 0))
    p = chisquare(np.rint(f * 100_000)).pvalue
    worst = float(np.max(np.abs(f - 0.1)))
    ok = p > 0.001 and worst <= 0.0028
    report(3, ok, f"chi-square p {p:.3f}, max |f - 0.1| {worst:.4f}, {time.perf_counter() - t0:.1f}s")
    assert ok


def test_criterion_4_voronoi_decay_envelope(report):
    ws = Workspace.square(1.0)
    gamma = gamma_constant(2, 6)
    k_max, reps = 10, 100
    t0 = time.perf_counter()
    logs = []
    for r in range(reps):
        rng = RngStream(0, r)
        init = rng.generator.uniform(0, 1, size=(10, 2))
        tr = voronoi_decay_experiment(ws, 10**12, rng, initial=init, stop_after_events=k_max)
        ev = tr.event_volumes(0, k_max)
        logs.append(np.log(ev / ev[0]))
    L = np.array(logs)
    assert np.all(np.isfinite(L))
    mean = L.mean(axis=0)
    se = L.std(axis=0, ddof=1) / math.sqrt(reps)
    env = np.arange(k_max + 1) * math.log(gamma)
    ok = bool(np.all(mean <= env + 3 * se)) and time.perf_counter() - t0 < 60
    report(4, ok, f"gamma {gamma:.5f}; mean log ratio at k=10 {mean[-1]:.3f} vs envelope {env[-1]:.3f}; "
                  f"largest (mean - envelope - 3se) over k>=1 {float(np.max((mean - env - 3 * se)[1:])):.3f}")
    assert ok


def _nn_episode(g: np.random.Generator, ops: int, tied: bool, factor: float) -> tuple:
    lin, kd = NnIndex("linear"), NnIndex("kdtree", rebuild_factor=factor)
    n = queries = 0
    for _ in range(ops):
        if n == 0 or g.random() < 0.4:
            # lattice coordinates produce exact distance ties and duplicates
            p = tuple((g.integers(0, 9, 2) / 4).tolist()) if tied else tuple(g.random(2).tolist())
            lin.insert(n, p)
            kd.insert(n, p)
            n += 1
        else:
            q = tuple((g.integers(-2, 19, 2) / 8).tolist()) if tied else tuple(g.random(2).tolist())
            if lin.nearest(q) != kd.nearest(q):
                return queries, 1
            queries += 1
    return queries, 0


def test_criterion_5_nn_oracle_equivalence(report):
    g = np.random.default_rng(5)
    total = mismatches = queries = 0
    ep = 0
    while total < 1_000_000:
        ops = int(g.integers(50, 2000))
        tied = ep % 2 == 0
        factor = (0.25, 1.0, 16.0)[ep % 3]
        q, m = _nn_episode(g, ops, tied, factor)
        queries += q
        mismatches += m
        total += ops
        ep += 1
    ok = mismatches == 0
    report(5, ok, f"{total} operations ({queries} queries) in {ep} episodes, {mismatches} mismatches")
    assert ok


def test_criterion_6_selection_bias(report):
    ws = Workspace.square(1.0)
    lin = selection_bias_experiment(ws, RngStream(0, 0), backend="linear")
    rnd = selection_bias_experiment(ws, RngStream(0, 1), backend="random")
    ok = lin.correlation > 0.8 and abs(rnd.correlation) < 0.15
    report(6, ok, f"linear r {lin.correlation:.3f}, random r {rnd.correlation:.3f} (n=200, window 2000)")
    assert ok


def test_criterion_7_cost_gap(report):
    ws = Workspace.square(1.0)
    goal = GoalRegion((0.9, 0.9), 0.05)
    c_star = straight_line_optimum((0.1, 0.1), goal)
    assert c_star == pytest.approx(1.081371, abs=1e-6)
    # the k-d tree returns the same vertex as the exhaustive scan, so the trees are identical
    cfg = PlannerConfig((0.1, 0.1), system=HolonomicSystem(0.05), nn_backend="kdtree")
    checkpoints = [1000, 5000, 10000, 20000, 50000]
    monotone, gaps = [], []
    for r in range(20):
        s = cost_convergence_experiment(ws, goal, cfg, checkpoints, RngStream(0, r))
        monotone.append(s.is_monotone())
        gaps.append(s.relative_gaps[-1])
    frac = sum(g > 0.02 for g in gaps) / len(gaps)
    gap_ok = frac >= 0.95
    ok = all(monotone)
    if not gap_ok:
        warnings.warn(f"relative gap > 2% in only {frac:.0%} of replicates", stacklevel=1)
    report(7, ok, f"c* {c_star:.6f}; Y_n monotone in {sum(monotone)}/20; gap > 2% at n=5e4 in {frac:.0%} "
                  f"(min {min(gaps):.3f}, median {float(np.median(gaps)):.3f})"
                  + ("" if gap_ok else "; gap expectation FLAGGED"))
    assert ok


DETERMINISM_CONFIGS = {
    "plan": {"replicates": 2},
    "fig2-degrees": {"planner": {"checkpoints": [500, 1000, 1500, 2000]}},
    "nn-probability": {"nn_probability": {"trials": 20000}},
    "voronoi-decay": {"replicates": 5},
    "selection-bias": {"selection_bias": {"n_nodes": 80, "window": 800}},
    "cost-convergence": {"replicates": 2, "cost_convergence": {"checkpoints": [500, 2000]}},
    "fit": {"replicates": 2, "planner": {"iterations": 4000}},
}


def test_criterion_8_determinism(report, tmp_path):
    differing = []
    for exp, extra in DETERMINISM_CONFIGS.items():
        doc = {"experiment": exp, "seed": 11, **extra}
        a, b = tmp_path / exp / "a", tmp_path / exp / "b"
        execute(doc, a)
        execute(doc, b)
        for p in sorted(a.glob("*.csv")):
            if p.read_bytes() != (b / p.name).read_bytes():
                differing.append(f"{exp}/{p.name}")
    ok = not differing
    report(8, ok, f"{len(DETERMINISM_CONFIGS)} experiments rerun; differing CSVs: {differing or 'none'}")
    assert ok


def test_criterion_9_structural_invariants(report):
    g = np.random.default_rng(9)
    failures = {"handshake": 0, "acyclic": 0, "Y_n": 0, "ccdf": 0, "voronoi": 0}
    n_inst = 1000
    for i in range(n_inst):
        obstacles = []
        for _ in range(int(g.integers(0, 3))):
            c = g.uniform(0.3, 0.7, 2)
            obstacles.append(Disc(tuple(c), float(g.uniform(0.02, 0.1))) if g.random() < 0.5
                             else Box(tuple(c - 0.05), tuple(c + 0.05)))
        ws = Workspace((0.0, 0.0), (1.0, 1.0), tuple(obstacles))
        goal = GoalRegion((0.9, 0.9), float(g.uniform(0.05, 0.2)))
        cfg = PlannerConfig((0.1, 0.1), iterations=int(g.integers(1, 250)), goal_bias=float(g.uniform(0, 0.3)),
                            system=HolonomicSystem(float(g.uniform(0.02, 0.3))),
                            nn_backend=("linear", "kdtree", "random")[i % 3], stop_on_goal=False)
        res = build_rrt(ws, goal, cfg, RngStream(int(g.integers(0, 2**63)), i))
        t = res.tree
        h = degree_histogram(t, int(g.integers(0, cfg.iterations + 1)))
        failures["handshake"] += h.edges() != h.n - 1
        failures["acyclic"] += not all(0 <= t.parents[j] < j for j in range(1, len(t)))
        ys = [res.best_cost_at(k) for k in range(0, cfg.iterations + 1, 5)]
        failures["Y_n"] += not all(b <= a for a, b in zip(ys, ys[1:]))
        fr = ccdf(h).fractions
        failures["ccdf"] += not (fr[0] == 1.0 and np.all(np.diff(fr) <= 0))
        pts = np.array(t.states)
        exact = voronoi_areas_exact(pts, ws).sum()
        mc = sum(e.volume_fraction for e in voronoi_volumes_mc(pts, ws, 500, RngStream(i, 1)))
        failures["voronoi"] += abs(exact - 1.0) > 1e-9 or abs(mc - 1.0) > 1e-12
    ok = not any(failures.values())
    report(9, ok, f"{n_inst} instances; violations {failures}")
    assert ok
