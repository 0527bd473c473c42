"""Execute a resolved experiment config and write its artifacts.

Every experiment writes CSV tables, SVG charts and ``manifest.json``. CSV
and SVG bytes depend only on the config and seed; timestamps live in the
manifest alone. Column schemas are listed in the README.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import subprocess
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, svg
from .analysis import (
    ccdf,
    chi_square_uniform,
    cost_convergence_experiment,
    degree_snapshots,
    fit_tail,
    gamma_constant,
    histogram_from_degrees,
    histogram_shape,
    mean_ccdf,
    pooled_histogram,
    selection_bias_experiment,
    voronoi_decay_experiment,
)
from .analysis.degrees import DegreeHistogram, InsufficientDataError, degree_histogram
from .config import config_hash, resolve
from .dynamics import CarModel, IntegrationSpec
from .nn import nearest_probability_trial
from .planner import CarSystem, HolonomicSystem, PlannerConfig, build_rrt, extract_path, path_cost
from .space import Box, Disc, GoalRegion, RngStream, Workspace

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# config -> objects
# --------------------------------------------------------------------------


def build_workspace(cfg: dict) -> Workspace:
    w = cfg["workspace"]
    obs = []
    for ob in w["obstacles"]:
        if ob["type"] == "disc":
            obs.append(Disc(tuple(float(c) for c in ob["center"]), float(ob["radius"])))
        else:
            obs.append(Box(tuple(float(c) for c in ob["lower"]), tuple(float(c) for c in ob["upper"])))
    return Workspace(tuple(w["lower"]), tuple(w["upper"]), tuple(obs))


def build_system(cfg: dict):
    s = cfg["system"]
    if s["type"] == "car":
        model = CarModel(s["wheelbase"], tuple(s["velocities"]), tuple(s["steering"]), s["max_steer"])
        return CarSystem(model, IntegrationSpec(s["dt"], s["substeps"]), s["theta_weight"], s["input_selection"])
    return HolonomicSystem(s["eps"])


def build_planner_config(cfg: dict) -> PlannerConfig:
    p = cfg["planner"]
    return PlannerConfig(
        start=tuple(float(c) for c in p["start"]),
        iterations=p["iterations"],
        goal_bias=p["goal_bias"],
        system=build_system(cfg),
        stop_on_goal=p["stop_on_goal"],
        nn_backend=p["nn_backend"],
        collision_resolution=cfg["workspace"]["collision_resolution"],
        repeat_extend=p["repeat_extend"],
    )


def build_goal(cfg: dict) -> GoalRegion | None:
    g = cfg["planner"]["goal"]
    if g is None:
        return None
    return GoalRegion(tuple(float(c) for c in g["center"]), float(g["radius"]))


# --------------------------------------------------------------------------
# artifact writing
# --------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


class Artifacts:
    """Collects output files so the manifest can hash them."""

    def __init__(self, out: Path):
        self.out = out
        self.files: dict = {}

    def text(self, name: str, content: str) -> None:
        data = content.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def table(self, name: str, header: list, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if len(r) != len(header):
                raise ValueError(f"{name}: row width {len(r)} != header width {len(header)}")
            w.writerow([_cell(v) for v in r])
        self.text(name, buf.getvalue())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.files):
            h.update(name.encode())
            h.update(self.files[name].encode())
        return h.hexdigest()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() or "unknown"


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def _streams(cfg: dict):
    return [RngStream(cfg["seed"], r) for r in range(cfg["replicates"])]


def _exp_plan(cfg: dict, art: Artifacts) -> dict:
    ws = build_workspace(cfg)
    pcfg = build_planner_config(cfg)
    goal = build_goal(cfg)
    metric = pcfg.metric
    summary = []
    for r, rng in enumerate(_streams(cfg)):
        res = build_rrt(ws, goal, pcfg, rng)
        tree = res.tree
        art.text(f"tree_r{r:03d}.csv", tree.to_csv())
        path_states = []
        cost = math.inf
        if res.goal_node is not None:
            path = extract_path(tree, res.goal_node)
            path_states = [s for s, _ in path]
            cost = path_cost(path, metric)
            rows, running = [], 0.0
            for i, (s, u) in enumerate(path):
                if i:
                    running += metric(path_states[i - 1], s)
                ctrl = ["", ""] if u is None else [u.v, u.phi]
                rows.append([i, *s, *(ctrl if pcfg.is_car else []), running])
            comps = ["x", "y", "theta"] if pcfg.is_car else [f"x{j}" for j in range(len(path_states[0]))]
            ctrl_cols = ["v", "phi"] if pcfg.is_car else []
            art.table(f"path_r{r:03d}.csv", ["step", *comps, *ctrl_cols, "cumulative_cost"], rows)
        if ws.dim == 2:
            art.text(f"tree_r{r:03d}.svg", svg.tree_drawing(
                tree.states, tree.parents, ws.lower, ws.upper,
                f"RRT, {len(tree)} nodes ({res.status})", path_states))
        summary.append({
            "replicate": r, "status": res.status, "nodes": len(tree), "goal_node": res.goal_node,
            "iterations_used": res.iterations_used, "extensions_attempted": res.extensions_attempted,
            "extensions_rejected": res.extensions_rejected, "path_cost": cost,
        })
    keys = list(summary[0])
    art.table("plan_summary.csv", keys, [[s[k] for k in keys] for s in summary])
    return {"status": summary[0]["status"], "path_cost": summary[0]["path_cost"], "replicates": summary}


def _exp_fig2(cfg: dict, art: Artifacts) -> dict:
    ws = build_workspace(cfg)
    pcfg = build_planner_config(cfg)
    checkpoints = sorted(cfg["planner"]["checkpoints"])
    per_k: dict = {k: [] for k in checkpoints}
    for rng in _streams(cfg):
        snaps = degree_snapshots(ws, pcfg, checkpoints, rng)
        for k in checkpoints:
            per_k[k].append(snaps[k])
    n_controls = len(pcfg.system.model.controls) if pcfg.is_car else None
    checks = {}
    for k in checkpoints:
        hists = per_k[k]
        rows = [[r, d, c] for r, h in enumerate(hists) for d, c in sorted(h.counts.items())]
        art.table(f"degrees_k{k:05d}.csv", ["replicate", "degree", "count"], rows)
        pooled = pooled_histogram(hists)
        degs = list(range(pooled.max_degree + 1))
        art.text(f"degrees_k{k:05d}.svg", svg.bar_chart(
            degs, [pooled.counts.get(d, 0) for d in degs],
            f"Out-degree histogram after {k} iterations", "out-degree", "number of nodes"))
        shapes = [histogram_shape(h) for h in hists]
        checks[str(k)] = {
            "decreasing": all(s["decreasing"] for s in shapes),
            "min_low_to_max_ratio": min(s["low_to_max_ratio"] for s in shapes),
            "max_degree": max(s["max_degree"] for s in shapes),
            "control_set_size": n_controls,
            "nodes": [s["n"] for s in shapes],
        }
    return {"checkpoints": checks}


def _exp_nn_probability(cfg: dict, art: Artifacts) -> dict:
    p = cfg["nn_probability"]
    n, d, trials = p["n"], p["d"], p["trials"]
    expected = 1.0 / n
    band = 3.0 * math.sqrt(expected * (1 - expected) / trials)
    rows, reps = [], []
    for r, rng in enumerate(_streams(cfg)):
        freq = nearest_probability_trial(n, d, trials, rng)
        counts = np.rint(freq * trials).astype(np.int64)
        stat, pval = chi_square_uniform(counts) if n > 1 else (0.0, 1.0)
        within = bool(np.all(np.abs(freq - expected) <= band))
        rows += [[r, i, float(f), expected, expected - band, expected + band] for i, f in enumerate(freq)]
        reps.append({"replicate": r, "chi_square": stat, "p_value": pval, "all_within_3sigma": within})
        if r == 0:
            art.text("nn_probability.svg", svg.bar_chart(
                list(range(n)), freq.tolist(), f"Nearest-point frequency, n={n}, d={d}", "insertion index",
                "frequency"))
    art.table("nn_probability.csv", ["replicate", "index", "frequency", "expected", "band_low", "band_high"], rows)
    return {"n": n, "d": d, "trials": trials, "replicates": reps}


def _exp_voronoi_decay(cfg: dict, art: Artifacts) -> dict:
    p = cfg["voronoi_decay"]
    ws = build_workspace(cfg)
    dim = ws.dim
    k_max = p["shrink_events"]
    gamma = gamma_constant(dim, p["cone_count"])
    logs, rows = [], []
    for r, rng in enumerate(_streams(cfg)):
        init = rng.generator.uniform(ws.lower, ws.upper, size=(p["initial_points"], dim))
        trace = voronoi_decay_experiment(
            ws, p["max_insertions"], rng, initial=init, tracked_ids=(0,), mc_samples=p["mc_samples"],
            method=p["method"], stop_after_events=k_max)
        ev = trace.event_volumes(0, k_max)
        rows_idx = trace.event_rows(0)
        for k in range(k_max + 1):
            ins = 0 if k == 0 else (int(trace.steps[rows_idx[k - 1] - 1]) if k <= len(rows_idx) else "")
            rows.append([r, k, ins, ev[k]])
        with np.errstate(divide="ignore", invalid="ignore"):
            logs.append(np.log(ev) - math.log(ev[0]))
    art.table("decay_events.csv", ["replicate", "event", "insertions", "volume_fraction"], rows)
    L = np.array(logs)
    summary, srows, below = [], [], True
    for k in range(k_max + 1):
        col = L[:, k]
        col = col[np.isfinite(col)]
        mean = float(col.mean()) if len(col) else math.nan
        se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        env = k * math.log(gamma)
        ok = bool(mean <= env + 3 * se) if len(col) else False
        below &= ok
        srows.append([k, len(col), mean, se, env, ok])
        summary.append({"event": k, "mean_log_ratio": mean, "stderr": se, "envelope": env, "below": ok})
    art.table("decay_summary.csv",
              ["event", "replicates", "mean_log_ratio", "stderr", "envelope_log_gamma", "below_envelope"], srows)
    ks = list(range(k_max + 1))
    art.text("decay.svg", svg.line_chart(
        {"mean log(V_k/V_0)": (ks, [s[2] for s in srows]), "k log(gamma)": (ks, [s[4] for s in srows])},
        "Tracked cell volume per shrink event", "shrink events k", "log volume ratio"))
    return {"gamma": gamma, "all_below_envelope": below, "events": summary}


def _exp_selection_bias(cfg: dict, art: Artifacts) -> dict:
    p = cfg["selection_bias"]
    ws = build_workspace(cfg)
    pl = cfg["planner"]
    rows, srows, out = [], [], []
    scat = {}
    for r in range(cfg["replicates"]):
        for b_i, backend in enumerate(p["backends"]):
            rng = RngStream(cfg["seed"], r * len(p["backends"]) + b_i)
            rep = selection_bias_experiment(
                ws, rng, p["n_nodes"], p["window"], backend, cfg["system"]["eps"], pl["start"],
                p["grow"], p["volume_method"], p["mc_samples"])
            rows += [[r, backend, i, float(f), float(v)] for i, (f, v) in enumerate(zip(rep.frequencies, rep.volumes))]
            srows.append([r, backend, rep.correlation])
            out.append({"replicate": r, "backend": backend, "correlation": rep.correlation})
            if r == 0:
                scat[backend] = (rep.volumes.tolist(), rep.frequencies.tolist())
    art.table("selection_bias.csv", ["replicate", "backend", "node", "frequency", "volume_fraction"], rows)
    art.table("selection_bias_summary.csv", ["replicate", "backend", "correlation"], srows)
    art.text("selection_bias.svg", svg.scatter(scat, "Selection frequency vs Voronoi volume",
                                               "Voronoi volume fraction", "selection frequency"))
    return {"runs": out}


def _exp_cost(cfg: dict, art: Artifacts) -> dict:
    p = cfg["cost_convergence"]
    ws = build_workspace(cfg)
    pcfg = build_planner_config(cfg)
    goal = build_goal(cfg)
    rows, lines, reps = [], {}, []
    thr = p["gap_threshold"]
    for r, rng in enumerate(_streams(cfg)):
        series = cost_convergence_experiment(ws, goal, pcfg, p["checkpoints"], rng)
        for k, y, g in zip(series.checkpoints, series.best_costs, series.relative_gaps):
            rows.append([r, k, y, series.c_star, g])
        if r < 6:
            lines[f"replicate {r}"] = (series.checkpoints, series.best_costs)
        reps.append({"replicate": r, "monotone": series.is_monotone(), "final_gap": series.relative_gaps[-1],
                     "c_star": series.c_star})
    art.table("cost_convergence.csv", ["replicate", "checkpoint", "best_cost", "c_star", "relative_gap"], rows)
    c_star = reps[0]["c_star"]
    k_all = sorted(p["checkpoints"])
    lines["c*"] = (k_all, [c_star] * len(k_all))
    art.text("cost_convergence.svg", svg.line_chart(lines, "Best goal-reaching cost Y_n", "iterations n",
                                                     "cost", xlog=True))
    frac = sum(1 for x in reps if x["final_gap"] > thr) / len(reps)
    return {
        "c_star": c_star,
        "all_monotone": all(x["monotone"] for x in reps),
        "fraction_gap_above_threshold": frac,
        "gap_threshold": thr,
        "gap_expectation_met": frac >= 0.95,
        "replicates": reps,
    }


def _read_degree_input(path: str) -> list:
    """Histograms from a tree CSV (``out_degree`` column) or a ``degree,count`` CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    if "out_degree" in rows[0]:
        return [histogram_from_degrees(int(r["out_degree"]) for r in rows)]
    if {"degree", "count"} <= set(rows[0]):
        groups: dict = {}
        for r in rows:
            g = groups.setdefault(r.get("replicate", "0"), {})
            g[int(r["degree"])] = g.get(int(r["degree"]), 0) + int(r["count"])
        return [DegreeHistogram(dict(sorted(c.items())), sum(c.values())) for _, c in sorted(groups.items())]
    raise ValueError(f"{path}: expected an out_degree column or degree,count columns")


def _exp_fit(cfg: dict, art: Artifacts) -> dict:
    p = cfg["fit"]
    if p["input"]:
        hists = _read_degree_input(p["input"])
    else:
        ws = build_workspace(cfg)
        pcfg = build_planner_config(cfg)
        hists = []
        for rng in _streams(cfg):
            res = build_rrt(ws, None, replace(pcfg, stop_on_goal=False), rng)
            hists.append(degree_histogram(res.tree))
    series = [ccdf(h) for h in hists]
    art.table("degree_ccdf.csv", ["replicate", "k", "fraction"],
              [[r, k, f] for r, s in enumerate(series) for k, f in s.points])
    fits, rows = [], []
    for r, s in enumerate(series):
        try:
            rep = fit_tail(s, p["k_min"], p["k_max"])
        except InsufficientDataError as exc:
            log.warning("replicate %d: %s", r, exc)
            continue
        fits.append(rep)
        for f in (rep.power, rep.exponential):
            rows.append([r, f.kind, f.exponent, f.intercept, f.r_squared, f.k_min, f.n_points])
    mean = mean_ccdf(series)
    pooled = fit_tail(mean, p["k_min"], p["k_max"])
    for f in (pooled.power, pooled.exponential):
        rows.append(["mean", f.kind, f.exponent, f.intercept, f.r_squared, f.k_min, f.n_points])
    art.table("fit.csv", ["replicate", "kind", "exponent", "intercept", "r_squared", "k_min", "n_points"], rows)
    ks = [k for k, _ in mean.points if k >= 1]
    art.text("degree_ccdf.svg", svg.line_chart(
        {"mean CCDF": (ks, [f for k, f in mean.points if k >= 1])},
        "Out-degree CCDF (log-log)", "k", "fraction with degree >= k", xlog=True, ylog=True, markers=True))
    mp = float(np.mean([f.power.r_squared for f in fits])) if fits else math.nan
    me = float(np.mean([f.exponential.r_squared for f in fits])) if fits else math.nan
    slope = float(np.mean([-f.power.exponent for f in fits])) if fits else math.nan
    return {
        "replicates_fitted": len(fits),
        "mean_power_r_squared": mp,
        "mean_exponential_r_squared": me,
        "mean_loglog_slope": slope,
        "mean_ccdf_fit": {"power_r_squared": pooled.power.r_squared,
                          "exponential_r_squared": pooled.exponential.r_squared,
                          "power_exponent": pooled.power.exponent},
        "tail_claim_met": bool(slope < 0 and max(mp, me) >= 0.9),
    }


EXPERIMENT_FUNCS = {
    "plan": _exp_plan,
    "fig2-degrees": _exp_fig2,
    "nn-probability": _exp_nn_probability,
    "voronoi-decay": _exp_voronoi_decay,
    "selection-bias": _exp_selection_bias,
    "cost-convergence": _exp_cost,
    "fit": _exp_fit,
}


def execute(raw_cfg: dict, out_dir: str | Path) -> dict:
    """Resolve ``raw_cfg``, run it into ``out_dir`` and return the manifest.

    Raises :class:`rrtlab.config.ConfigError` for invalid configs.
    """
    cfg = resolve(raw_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = Artifacts(out)
    started = datetime.now(timezone.utc).isoformat()
    results = EXPERIMENT_FUNCS[cfg["experiment"]](cfg, art)
    manifest = {
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "replicates": cfg["replicates"],
        "config": cfg,
        "config_hash": config_hash(cfg),
        "content_hash": art.content_hash(),
        "artifacts": dict(sorted(art.files.items())),
        "results": results,
        "package_version": __version__,
        "git_describe": git_describe(),
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return manifest
