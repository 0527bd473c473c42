from __future__ import annotations

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import MultiPoint, box

from rrtlab.analysis import voronoi_areas_exact, voronoi_decay_experiment, voronoi_volumes_mc
from rrtlab.analysis.voronoi import clip_bisector, polygon_area, voronoi_cell
from rrtlab.space import CarMetric, RngStream, Workspace

UNIT = Workspace.square(1.0)


def shapely_areas(pts):
    regions = shapely.voronoi_polygons(MultiPoint([tuple(p) for p in pts]), extend_to=box(-2, -2, 3, 3))
    clip = box(0, 0, 1, 1)
    out = np.zeros(len(pts))
    for poly in regions.geoms:
        cell = poly.intersection(clip)
        for i, p in enumerate(pts):
            if poly.contains(shapely.Point(p)):
                out[i] = cell.area
    return out


def test_single_point_mc_is_one():
    est = voronoi_volumes_mc(np.array([[0.3, 0.3]]), UNIT, 1000, RngStream(0, 0))
    assert est[0].volume_fraction == 1.0


def test_two_point_symmetry():
    est = voronoi_volumes_mc(np.array([[0.25, 0.5], [0.75, 0.5]]), UNIT, 100_000, RngStream(1, 0))
    for e in est:
        assert abs(e.volume_fraction - 0.5) <= 3 * 0.0016


def test_mc_matches_exact_polygons():
    rng = np.random.default_rng(8)
    pts = rng.random((5, 2))
    exact = voronoi_areas_exact(pts, UNIT)
    est = voronoi_volumes_mc(pts, UNIT, 200_000, RngStream(2, 0))
    for e, a in zip(est, exact):
        assert abs(e.volume_fraction - a) <= 3 * max(e.stderr, 1e-4)
    assert sum(e.volume_fraction for e in est) == pytest.approx(1.0, abs=1e-12)


def test_exact_matches_shapely():
    rng = np.random.default_rng(4)
    for n in (2, 5, 30, 200):
        pts = rng.random((n, 2))
        assert np.allclose(voronoi_areas_exact(pts, UNIT), shapely_areas(pts), atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=40))
def test_exact_fractions_sum_to_one(pts):
    a = voronoi_areas_exact(np.array(pts), UNIT)
    assert a.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(a >= 0)


def test_coincident_points_smallest_id_keeps_cell():
    pts = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.1]])
    a = voronoi_areas_exact(pts, UNIT)
    assert a[1] == 0.0 and a[0] > 0 and a.sum() == pytest.approx(1.0)


def test_clip_bisector_halves_square():
    sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    assert polygon_area(clip_bisector(sq, (0.25, 0.5), (0.75, 0.5))) == pytest.approx(0.5)


def test_mc_car_metric_sums_to_one():
    pts = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 3.0], [5.0, 5.0, -1.0]])
    est = voronoi_volumes_mc(pts, Workspace.square(10.0), 20_000, RngStream(0, 0), CarMetric())
    assert sum(e.volume_fraction for e in est) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12))
def test_exact_cell_set_monotone(seed, n0):
    g = np.random.default_rng(seed)
    pts = g.random((n0, 2))
    prev = polygon_area(voronoi_cell(pts, 0, (0, 0), (1, 1)))
    for _ in range(30):
        pts = np.vstack([pts, g.random((1, 2))])
        cur = polygon_area(voronoi_cell(pts, 0, (0, 0), (1, 1)))
        assert cur <= prev + 1e-15
        prev = cur


def test_decay_exact_trace_non_increasing():
    tr = voronoi_decay_experiment(UNIT, 5000, RngStream(0, 0), initial=np.array([[0.5, 0.5], [0.1, 0.9]]),
                                  tracked_ids=(0, 1))
    v = tr.volumes
    assert np.all(np.diff(v, axis=0) <= 1e-15)
    assert tr.n_inserted == 5000


def test_skip_ahead_matches_brute_force_in_distribution():
    # skip-ahead must not miss any point that changes the cell
    n, reps = 300, 200
    skip, brute = [], []
    g = np.random.default_rng(17)
    for r in range(reps):
        tr = voronoi_decay_experiment(UNIT, n, RngStream(31, r), initial=np.array([[0.3, 0.6]]))
        skip.append(tr.volume_at(n)[0])
        pts = np.vstack([[0.3, 0.6], g.random((n, 2))])
        brute.append(polygon_area(voronoi_cell(pts, 0, (0, 0), (1, 1))))
    se = np.sqrt(np.var(skip) / reps + np.var(brute) / reps)
    assert abs(np.mean(skip) - np.mean(brute)) <= 4 * se


def test_decay_mc_monotone_up_to_noise():
    tr = voronoi_decay_experiment(UNIT, 200, RngStream(5, 0), initial=np.array([[0.5, 0.5]]),
                                  mc_samples=20_000, method="mc")
    v, se = tr.volumes[:, 0], tr.stderr[:, 0]
    ups = np.diff(v) > 3 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    assert ups.mean() < 0.01


def test_decay_mc_agrees_with_exact_in_distribution():
    exact, mc = [], []
    for r in range(40):
        e = voronoi_decay_experiment(UNIT, 50, RngStream(9, r), initial=np.array([[0.5, 0.5]]))
        m = voronoi_decay_experiment(UNIT, 50, RngStream(9, 1000 + r), initial=np.array([[0.5, 0.5]]),
                                     mc_samples=4000, method="mc")
        exact.append(e.volume_at(50)[0])
        mc.append(m.volumes[-1, 0])
    se = np.sqrt(np.var(exact) / 40 + np.var(mc) / 40)
    assert abs(np.mean(exact) - np.mean(mc)) <= 4 * se


def test_center_decays_no_slower_than_corner():
    center, corner = [], []
    for r in range(100):
        init = np.array([[0.5, 0.5], [0.02, 0.02]])
        tr = voronoi_decay_experiment(UNIT, 200, RngStream(21, r), initial=init, tracked_ids=(0, 1))
        v0 = tr.volumes[0]
        v = tr.volume_at(200)
        center.append(np.log(v[0] / v0[0]))
        corner.append(np.log(v[1] / v0[1]))
    assert np.mean(center) <= np.mean(corner)


def test_decay_event_bookkeeping():
    tr = voronoi_decay_experiment(UNIT, 10**9, RngStream(0, 0), initial=np.array([[0.5, 0.5]]),
                                  stop_after_events=10)
    assert tr.event_count(0) == 10
    ev = tr.event_volumes(0, 10)
    assert ev[0] == 1.0 and np.all(np.diff(ev) <= 0)
