from __future__ import annotations

import csv
import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from rrtlab.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_files(d: Path):
    return sorted(p for p in d.iterdir() if p.suffix == ".csv")


def check_artifacts(d: Path):
    for p in csv_files(d):
        rows = list(csv.reader(p.open()))
        assert rows and len({len(r) for r in rows}) == 1, p.name
    for p in d.glob("*.svg"):
        ET.parse(p)
    m = json.loads((d / "manifest.json").read_text())
    assert set(m["artifacts"]) == {p.name for p in d.iterdir() if p.name != "manifest.json"}
    return m


@pytest.fixture(scope="module")
def fig2_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fig2")
    assert main(["fig2-degrees", "--out", str(d)]) == 0
    return d


def test_fig2_file_counts(fig2_dir):
    names = sorted(p.name for p in fig2_dir.iterdir())
    assert len([n for n in names if n.endswith(".csv")]) == 4
    assert len([n for n in names if n.endswith(".svg")]) == 4
    assert "manifest.json" in names
    m = check_artifacts(fig2_dir)
    assert m["config"]["planner"]["checkpoints"] == [5000, 10000, 15000, 20000]
    assert m["seed"] == 0 and len(m["config_hash"]) == 64


def test_plan_path_cost_recomputed(tmp_path, capsys):
    code, out, _ = run(["plan", "--out", str(tmp_path), "--seed", "3"], capsys)
    assert code == 0
    m = check_artifacts(tmp_path)
    assert m["results"]["status"] == "reached"
    rows = list(csv.DictReader((tmp_path / "path_r000.csv").open()))
    pts = [(float(r["x0"]), float(r["x1"])) for r in rows]
    cost = math.fsum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
    assert cost == pytest.approx(float(rows[-1]["cumulative_cost"]), abs=1e-12)
    assert cost == pytest.approx(m["results"]["path_cost"], abs=1e-12)
    g = m["config"]["planner"]["goal"]
    assert math.dist(pts[-1], g["center"]) <= g["radius"]


def test_car_plan_path_cost(tmp_path, capsys):
    cfg = tmp_path / "car.yaml"
    cfg.write_text("system:\n  type: car\nplanner:\n  iterations: 4000\n  goal_bias: 0.05\n"
                   "  goal:\n    center: [16.0, 16.0, 0.0]\n    radius: 1.5\n")
    out = tmp_path / "o"
    code, _, err = run(["plan", "-c", str(cfg), "--out", str(out)], capsys)
    assert code == 0, err
    m = check_artifacts(out)
    if m["results"]["status"] == "reached":
        from rrtlab.space import CarMetric

        rows = list(csv.DictReader((out / "path_r000.csv").open()))
        st = [(float(r["x"]), float(r["y"]), float(r["theta"])) for r in rows]
        metric = CarMetric(m["config"]["system"]["theta_weight"])
        cost = math.fsum(metric(a, b) for a, b in zip(st, st[1:]))
        assert cost == pytest.approx(float(rows[-1]["cumulative_cost"]), rel=1e-12)


@pytest.mark.parametrize("exp, extra", [
    ("plan", "replicates: 2\n"),
    ("nn-probability", "nn_probability:\n  trials: 20000\n"),
    ("voronoi-decay", "replicates: 3\n"),
    ("selection-bias", "selection_bias:\n  n_nodes: 60\n  window: 600\n"),
    ("cost-convergence", "replicates: 2\ncost_convergence:\n  checkpoints: [200, 800]\n"),
    ("fit", "replicates: 2\nplanner:\n  iterations: 3000\n"),
])
def test_rerun_byte_identical(tmp_path, capsys, exp, extra):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(extra)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([exp, "-c", str(cfg), "--out", str(a), "--seed", "5"]) == 0
    assert main([exp, "-c", str(cfg), "--out", str(b), "--seed", "5"]) == 0
    capsys.readouterr()
    ma, mb = check_artifacts(a), check_artifacts(b)
    for p in csv_files(a):
        assert p.read_bytes() == (b / p.name).read_bytes()
    for p in a.glob("*.svg"):
        assert p.read_bytes() == (b / p.name).read_bytes()
    assert ma["content_hash"] == mb["content_hash"]


def test_different_seed_changes_output(tmp_path):
    assert main(["plan", "--out", str(tmp_path / "a"), "--seed", "1"]) == 0
    assert main(["plan", "--out", str(tmp_path / "b"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "tree_r000.csv").read_bytes() != (tmp_path / "b" / "tree_r000.csv").read_bytes()


def test_fit_from_input_csv(tmp_path, fig2_dir, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"fit:\n  input: {fig2_dir / 'degrees_k20000.csv'}\n")
    code, _, err = run(["fit", "-c", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 0, err
    m = check_artifacts(tmp_path / "o")
    assert m["results"]["replicates_fitted"] == 1


def test_invalid_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("planner:\n  goal_bias: 1.5\n")
    code, _, err = run(["plan", "-c", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    lines = err.strip().splitlines()
    assert len(lines) == 1
    e = json.loads(lines[0])
    assert e["error"] == "config" and e["diagnostics"][0]["key"] == "planner.goal_bias"
    assert not (tmp_path / "o").exists()


def test_experiment_mismatch_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: fit\n")
    assert run(["plan", "-c", str(cfg)], capsys)[0] == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("fit:\n  input: /does/not/exist.csv\n")
    code, _, err = run(["fit", "-c", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert json.loads(err.strip())["error"] == "FileNotFoundError"


def test_start_in_obstacle_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("workspace:\n  obstacles:\n    - {type: disc, center: [0.1, 0.1], radius: 0.05}\n")
    code, _, err = run(["plan", "-c", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and len(err.strip().splitlines()) == 1


def test_env_var_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RRTLAB_OUT", str(tmp_path / "env"))
    assert run(["plan"], capsys)[0] == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_check_flag(capsys):
    code, out, _ = run(["plan", "--check"], capsys)
    assert code == 0 and json.loads(out)["ok"]


def test_help_lists_experiments():
    res = subprocess.run([sys.executable, "-m", "rrtlab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ("plan", "fig2-degrees", "nn-probability", "voronoi-decay", "selection-bias",
                 "cost-convergence", "fit"):
        assert name in res.stdout
