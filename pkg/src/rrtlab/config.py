"""Experiment configuration: YAML document, strict schema, resolved defaults.

Every key has a default. ``null`` entries marked *auto* below are filled in
by :func:`resolve` from the experiment and system type, and the resolved
document is what gets written to the run manifest.
"""

from __future__ import annotations

import copy
import difflib
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import yaml

EXPERIMENTS = (
    "plan",
    "fig2-degrees",
    "nn-probability",
    "voronoi-decay",
    "selection-bias",
    "cost-convergence",
    "fit",
)

DEFAULTS: dict = {
    "experiment": "plan",
    "seed": 0,
    "replicates": 1,
    "output_dir": "rrtlab-out",
    "workspace": {
        "lower": None,  # auto: origin
        "upper": None,  # auto: 1 per axis (holonomic) or 20 (car)
        "obstacles": [],
        "collision_resolution": None,  # auto: 1/100 of the shortest side
    },
    "system": {
        "type": None,  # auto: car for fig2-degrees, holonomic otherwise
        "dim": 2,
        "eps": 0.05,
        "wheelbase": 1.0,
        "velocities": [1.0],
        "steering": [-0.5, -0.25, 0.0, 0.25, 0.5],
        "max_steer": 1.2,
        "dt": 0.5,
        "substeps": 10,
        "theta_weight": 0.1,
        "input_selection": "best",
    },
    "planner": {
        "iterations": None,  # auto: last checkpoint (fig2-degrees, fit) or 5000
        "goal_bias": 0.0,
        "stop_on_goal": True,
        "nn_backend": "linear",
        "repeat_extend": False,
        "start": None,  # auto: see resolve()
        "goal": None,  # auto for plan: {center, radius}; mapping otherwise
        "checkpoints": [5000, 10000, 15000, 20000],
    },
    "nn_probability": {"n": 10, "d": 2, "trials": 100000},
    "voronoi_decay": {
        "initial_points": 10,
        "shrink_events": 10,
        "cone_count": 6,
        "method": "exact",
        "mc_samples": 20000,
        "max_insertions": 10**12,
    },
    "selection_bias": {
        "n_nodes": 200,
        "window": 2000,
        "backends": ["linear", "random"],
        "volume_method": "exact",
        "mc_samples": 100000,
        "grow": False,
    },
    "cost_convergence": {
        "checkpoints": [1000, 5000, 10000, 20000, 50000],
        "gap_threshold": 0.02,
    },
    "fit": {"k_min": 1, "k_max": None, "input": None},
}

# common misspellings and synonyms mapped to the real key
ALIASES = {
    "stepsize": "eps",
    "step_size": "eps",
    "step": "eps",
    "epsilon": "eps",
    "K": "iterations",
    "k": "iterations",
    "max_iterations": "iterations",
    "iters": "iterations",
    "bias": "goal_bias",
    "L": "wheelbase",
    "wheel_base": "wheelbase",
    "delta_t": "dt",
    "timestep": "dt",
    "nn": "nn_backend",
    "backend": "nn_backend",
    "out": "output_dir",
    "outdir": "output_dir",
}


class ConfigError(ValueError):
    def __init__(self, diagnostics: list):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


# --------------------------------------------------------------------------
# value checks
# --------------------------------------------------------------------------


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _num_list(v, min_len=1) -> bool:
    return isinstance(v, list) and len(v) >= min_len and all(_is_num(x) for x in v)


def _check_obstacles(v) -> str | None:
    if not isinstance(v, list):
        return "must be a list of obstacles"
    for i, ob in enumerate(v):
        if not isinstance(ob, dict) or ob.get("type") not in ("disc", "box"):
            return f"obstacle {i} needs type 'disc' or 'box'"
        want = {"type", "center", "radius"} if ob["type"] == "disc" else {"type", "lower", "upper"}
        if set(ob) != want:
            return f"obstacle {i} ({ob['type']}) needs exactly keys {sorted(want)}"
        if ob["type"] == "disc" and not (_num_list(ob["center"]) and _is_num(ob["radius"]) and ob["radius"] > 0):
            return f"obstacle {i}: disc needs numeric center and radius > 0"
        if ob["type"] == "box" and not (
            _num_list(ob["lower"]) and _num_list(ob["upper"]) and len(ob["lower"]) == len(ob["upper"])
            and all(h > lo for lo, h in zip(ob["lower"], ob["upper"]))
        ):
            return f"obstacle {i}: box needs lower < upper on every axis"
    return None


def _check_goal(v) -> str | None:
    if v is None:
        return None
    if not isinstance(v, dict) or set(v) != {"center", "radius"}:
        return "must be null or a mapping with keys center and radius"
    if not _num_list(v["center"]) or not (_is_num(v["radius"]) and v["radius"] > 0):
        return "needs a numeric center and radius > 0"
    return None


def _opt(check: Callable[[Any], bool], msg: str) -> Callable[[Any], str | None]:
    return lambda v: None if v is None or check(v) else msg


def _req(check: Callable[[Any], bool], msg: str) -> Callable[[Any], str | None]:
    return lambda v: None if check(v) else msg


POS = lambda v: _is_num(v) and v > 0  # noqa: E731
POS_INT = lambda v: _is_int(v) and v >= 1  # noqa: E731
U64 = lambda v: _is_int(v) and 0 <= v < 2**64  # noqa: E731

CHECKS: dict = {
    "experiment": _req(lambda v: v in EXPERIMENTS, f"must be one of {', '.join(EXPERIMENTS)}"),
    "seed": _req(U64, "must be an unsigned 64-bit integer"),
    "replicates": _req(POS_INT, "must be an integer >= 1"),
    "output_dir": _req(lambda v: isinstance(v, str) and v != "", "must be a non-empty path"),
    "workspace.lower": _opt(_num_list, "must be a list of numbers"),
    "workspace.upper": _opt(_num_list, "must be a list of numbers"),
    "workspace.obstacles": _check_obstacles,
    "workspace.collision_resolution": _opt(POS, "must be a positive number"),
    "system.type": _req(lambda v: v in (None, "holonomic", "car"), "must be holonomic or car"),
    "system.dim": _req(POS_INT, "must be an integer >= 1"),
    "system.eps": _req(POS, "must be a positive number"),
    "system.wheelbase": _req(POS, "must be a positive number"),
    "system.velocities": _req(_num_list, "must be a non-empty list of numbers"),
    "system.steering": _req(_num_list, "must be a non-empty list of numbers"),
    "system.max_steer": _req(lambda v: _is_num(v) and 0 < v < math.pi / 2, "must lie in (0, pi/2)"),
    "system.dt": _req(POS, "must be a positive number"),
    "system.substeps": _req(POS_INT, "must be an integer >= 1"),
    "system.theta_weight": _req(lambda v: _is_num(v) and v >= 0, "must be a non-negative number"),
    "system.input_selection": _req(lambda v: v in ("best", "random"), "must be best or random"),
    "planner.iterations": _opt(POS_INT, "must be an integer >= 1"),
    "planner.goal_bias": _req(lambda v: _is_num(v) and 0 <= v <= 1, "must be a probability in [0, 1]"),
    "planner.stop_on_goal": _req(lambda v: isinstance(v, bool), "must be true or false"),
    "planner.nn_backend": _req(lambda v: v in ("linear", "kdtree", "random"), "must be linear, kdtree or random"),
    "planner.repeat_extend": _req(lambda v: isinstance(v, bool), "must be true or false"),
    "planner.start": _opt(_num_list, "must be a list of numbers"),
    "planner.goal": _check_goal,
    "planner.checkpoints": _req(lambda v: isinstance(v, list) and v and all(POS_INT(x) for x in v),
                                "must be a non-empty list of positive integers"),
    "nn_probability.n": _req(POS_INT, "must be an integer >= 1"),
    "nn_probability.d": _req(POS_INT, "must be an integer >= 1"),
    "nn_probability.trials": _req(POS_INT, "must be an integer >= 1"),
    "voronoi_decay.initial_points": _req(POS_INT, "must be an integer >= 1"),
    "voronoi_decay.shrink_events": _req(POS_INT, "must be an integer >= 1"),
    "voronoi_decay.cone_count": _req(POS_INT, "must be an integer >= 1"),
    "voronoi_decay.method": _req(lambda v: v in ("exact", "mc"), "must be exact or mc"),
    "voronoi_decay.mc_samples": _req(POS_INT, "must be an integer >= 1"),
    "voronoi_decay.max_insertions": _req(POS_INT, "must be an integer >= 1"),
    "selection_bias.n_nodes": _req(POS_INT, "must be an integer >= 1"),
    "selection_bias.window": _req(POS_INT, "must be an integer >= 1"),
    "selection_bias.backends": _req(
        lambda v: isinstance(v, list) and v and all(b in ("linear", "kdtree", "random") for b in v),
        "must be a non-empty list drawn from linear, kdtree, random"),
    "selection_bias.volume_method": _req(lambda v: v in ("exact", "mc"), "must be exact or mc"),
    "selection_bias.mc_samples": _req(POS_INT, "must be an integer >= 1"),
    "selection_bias.grow": _req(lambda v: isinstance(v, bool), "must be true or false"),
    "cost_convergence.checkpoints": _req(lambda v: isinstance(v, list) and v and all(POS_INT(x) for x in v),
                                         "must be a non-empty list of positive integers"),
    "cost_convergence.gap_threshold": _req(lambda v: _is_num(v) and v >= 0, "must be a non-negative number"),
    "fit.k_min": _req(POS_INT, "must be an integer >= 1"),
    "fit.k_max": _opt(POS_INT, "must be an integer >= 1"),
    "fit.input": _opt(lambda v: isinstance(v, str) and v != "", "must be a path"),
}


def _dotted_keys(schema: dict, prefix: str = "") -> list:
    out = []
    for k, v in schema.items():
        out.append(prefix + k)
        if isinstance(v, dict):
            out.extend(_dotted_keys(v, prefix + k + "."))
    return out


def _suggest(key: str, valid: list) -> str:
    leaf = key.rsplit(".", 1)[-1]
    target = ALIASES.get(leaf)
    if target in valid:
        return f"; did you mean `{target}`?"
    if target is not None:
        elsewhere = [d for d in _dotted_keys(DEFAULTS) if d.rsplit(".", 1)[-1] == target]
        if elsewhere:
            return f"; did you mean `{elsewhere[0]}`?"
    close = difflib.get_close_matches(leaf, valid, n=1, cutoff=0.6)
    return f"; did you mean `{close[0]}`?" if close else ""


def _walk_unknown(doc: dict, schema: dict, prefix: str, out: list) -> None:
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if not isinstance(key, str) or key not in schema:
            out.append(Diagnostic(path, "unknown key" + _suggest(str(key), list(schema))))
            continue
        if isinstance(schema[key], dict):
            if not isinstance(value, dict):
                out.append(Diagnostic(path, "must be a mapping"))
            else:
                _walk_unknown(value, schema[key], path + ".", out)


def merge_defaults(doc: dict) -> dict:
    """Defaults overlaid with ``doc``; unknown keys are kept so validation can report them."""
    out = copy.deepcopy(DEFAULTS)

    def overlay(dst: dict, src: dict) -> None:
        for k, v in src.items():
            if isinstance(v, dict) and isinstance(dst.get(k), dict):
                overlay(dst[k], v)
            else:
                dst[k] = copy.deepcopy(v)

    overlay(out, doc or {})
    return out


def _get(cfg: dict, dotted: str):
    cur = cfg
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def validate(doc: dict | None) -> list:
    """Diagnostics for a raw config document; empty iff it can be run."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        return [Diagnostic("<root>", "config must be a mapping")]
    out: list = []
    _walk_unknown(doc, DEFAULTS, "", out)
    if out:
        return out
    cfg = merge_defaults(doc)
    for key, check in CHECKS.items():
        msg = check(_get(cfg, key))
        if msg:
            out.append(Diagnostic(key, msg))
    if out:
        return out
    try:
        resolve(cfg)
    except ConfigError as exc:
        out.extend(exc.diagnostics)
    return out


def _side_default(system_type: str) -> float:
    return 20.0 if system_type == "car" else 1.0


def resolve(cfg: dict) -> dict:
    """Fill every *auto* entry; raises ConfigError on inconsistent combinations."""
    cfg = merge_defaults(cfg)
    exp = cfg["experiment"]
    sys_ = cfg["system"]
    ws = cfg["workspace"]
    pl = cfg["planner"]
    diags: list = []
    if sys_["type"] is None:
        sys_["type"] = "car" if exp == "fig2-degrees" else "holonomic"
    car = sys_["type"] == "car"
    dim = 2 if car else sys_["dim"]
    if car and sys_["dim"] != 2:
        diags.append(Diagnostic("system.dim", "the car system is planar; dim must be 2"))
    side = _side_default(sys_["type"])
    if ws["lower"] is None:
        ws["lower"] = [0.0] * dim
    if ws["upper"] is None:
        ws["upper"] = [ws["lower"][i] + side for i in range(len(ws["lower"]))]
    ws["lower"] = [float(v) for v in ws["lower"]]
    ws["upper"] = [float(v) for v in ws["upper"]]
    if len(ws["lower"]) != dim or len(ws["upper"]) != dim:
        diags.append(Diagnostic("workspace.lower", f"workspace bounds must have {dim} coordinates"))
    elif not all(h > lo for lo, h in zip(ws["lower"], ws["upper"])):
        diags.append(Diagnostic("workspace.upper", "upper must exceed lower on every axis"))
    for i, ob in enumerate(ws["obstacles"]):
        n = len(ob["center"]) if ob["type"] == "disc" else len(ob["lower"])
        if n != dim:
            diags.append(Diagnostic("workspace.obstacles", f"obstacle {i} has {n} coordinates, expected {dim}"))
    if car:
        for p in sys_["steering"]:
            if abs(p) > sys_["max_steer"]:
                diags.append(Diagnostic("system.steering", f"|{p}| exceeds system.max_steer"))
    if diags:
        raise ConfigError(diags)

    lo, hi = ws["lower"], ws["upper"]
    span = [h - l for l, h in zip(lo, hi)]
    corner = exp in ("plan", "cost-convergence")
    if pl["start"] is None:
        frac = 0.1 if corner else 0.5
        pl["start"] = [l + frac * s for l, s in zip(lo, span)]
        if car:
            pl["start"].append(0.0)
    if pl["goal"] is None and corner:
        center = [l + 0.9 * s for l, s in zip(lo, span)]
        if car:
            center.append(0.0)
        pl["goal"] = {"center": center, "radius": 0.05 * min(span)}
    want = dim + (1 if car else 0)
    if len(pl["start"]) != want:
        diags.append(Diagnostic("planner.start", f"must have {want} components"))
    if pl["goal"] is not None and len(pl["goal"]["center"]) != want:
        diags.append(Diagnostic("planner.goal", f"center must have {want} components"))
    if pl["iterations"] is None:
        if exp in ("fig2-degrees", "fit"):
            pl["iterations"] = max(pl["checkpoints"])
        elif exp == "cost-convergence":
            pl["iterations"] = max(cfg["cost_convergence"]["checkpoints"])
        else:
            pl["iterations"] = 5000
    if exp == "cost-convergence":
        if car:
            diags.append(Diagnostic("system.type", "cost-convergence needs the holonomic system"))
        if ws["obstacles"]:
            diags.append(Diagnostic("workspace.obstacles", "cost-convergence needs an obstacle-free workspace"))
        if pl["goal"] is None:
            diags.append(Diagnostic("planner.goal", "cost-convergence needs a goal"))
    if exp == "selection-bias" and (car or dim != 2) and cfg["selection_bias"]["volume_method"] == "exact":
        diags.append(Diagnostic("selection_bias.volume_method", "exact volumes need a planar holonomic system"))
    if exp == "voronoi-decay" and dim != 2 and cfg["voronoi_decay"]["method"] == "exact":
        diags.append(Diagnostic("voronoi_decay.method", "the exact method needs dim 2; use mc"))
    if diags:
        raise ConfigError(diags)
    return cfg


def load(path: str | Path | None) -> dict:
    """Parse a YAML (or JSON) config file; ``None`` gives the empty document."""
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([Diagnostic("<file>", f"not valid YAML: {str(exc).splitlines()[0]}")]) from exc
    return {} if doc is None else doc


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
