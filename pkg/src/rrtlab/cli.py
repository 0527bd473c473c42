"""Command line entry point: ``rrtlab <experiment> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import EXPERIMENTS, ConfigError, load, validate

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

HELP = {
    "plan": "grow one RRT per replicate toward a goal; write trees, paths and drawings",
    "fig2-degrees": "out-degree histograms of car RRTs at several iteration counts",
    "nn-probability": "check that each of n uniform points is nearest with probability 1/n",
    "voronoi-decay": "track one Voronoi cell while uniform points are inserted",
    "selection-bias": "correlate expansion frequency with Voronoi volume per vertex",
    "cost-convergence": "best goal-reaching cost versus iterations against the optimum",
    "fit": "fit power-law and exponential tails to an out-degree CCDF",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rrtlab",
        description="RRT planner and experiment runner.",
        epilog="experiments:\n" + "\n".join(f"  {k:<18}{v}" for k, v in HELP.items()),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("experiment", choices=EXPERIMENTS, metavar="experiment", help="one of: " + ", ".join(EXPERIMENTS))
    p.add_argument("--config", "-c", help="YAML config file; keys not given take their defaults")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--replicates", type=int, help="override the config replicate count")
    p.add_argument("--out", "-o", help="output directory (else $RRTLAB_OUT, else config output_dir)")
    p.add_argument("--check", action="store_true", help="validate the config and exit")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def _fail(code: int, kind: str, message: str, diagnostics: list | None = None) -> int:
    err = {"error": kind, "message": message}
    if diagnostics:
        err["diagnostics"] = [{"key": d.key, "message": d.message} for d in diagnostics]
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        doc = load(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.diagnostics)
    except OSError as exc:
        return _fail(EXIT_CONFIG, "config", f"cannot read {args.config}: {exc.strerror}")
    if not isinstance(doc, dict):
        return _fail(EXIT_CONFIG, "config", "config must be a mapping")
    doc = dict(doc)
    if doc.get("experiment", args.experiment) != args.experiment:
        return _fail(EXIT_CONFIG, "config", f"config is for {doc['experiment']!r}, not {args.experiment!r}")
    doc["experiment"] = args.experiment
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replicates is not None:
        doc["replicates"] = args.replicates
    out = args.out or os.environ.get("RRTLAB_OUT")
    if out:
        doc["output_dir"] = out
    diags = validate(doc)
    if diags:
        return _fail(EXIT_CONFIG, "config", "; ".join(str(d) for d in diags), diags)
    if args.check:
        print(json.dumps({"ok": True, "experiment": args.experiment}))
        return EXIT_OK

    from .runner import execute

    try:
        manifest = execute(doc, doc.get("output_dir", "rrtlab-out"))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.diagnostics)
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc).splitlines()[0] if str(exc) else repr(exc))
    print(json.dumps({"experiment": manifest["experiment"], "output_dir": str(manifest["config"]["output_dir"]),
                      "content_hash": manifest["content_hash"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
