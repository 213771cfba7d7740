"""Command-line interface.

JSON goes to stdout, logs and errors to stderr.  Exit codes: 0 success,
1 internal error, 2 bad input or failed precondition.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from importlib.resources import files
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bhep import SIGMA_CENTERS, null_quantile_table, simulate_null
from .bootstrap import MECHANISMS, BootstrapConfig, CompleteCase, bootstrap_test, naive_test, parse_approach
from .dataset import IncompleteMatrix, PerColumn, RowThenValue, ampute_mcar, format_csv, read_csv
from .errors import BhepError
from .harness import emit_figure_data, load_grid, read_results_csv, results_to_csv, run_grid
from .numerics import RngStream

log = logging.getLogger("bhep_mcar")

FULL_SCALE = {"N": 2000, "B": 1000}


class UsageError(Exception):
    """Bad command-line input (exit code 2)."""


def _seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("BHEP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"BHEP_SEED must be an integer, got {env!r}") from None
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_test(args) -> int:
    seed = _seed(args.seed)
    data = read_csv(args.input, header=args.header)
    try:
        method = parse_approach(args.method, knn_aggregate=args.knn_aggregate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.naive:
        if isinstance(method, CompleteCase):
            raise UsageError("--naive needs an imputation method, not complete-case")
        null = simulate_null(data.n, data.d, args.M, RngStream(seed).generator())
        outcome = naive_test(data, method, null, args.alpha)
        outcome.config.update(seed=seed)
    else:
        cfg = BootstrapConfig(
            B=args.B,
            alpha=args.alpha,
            master_seed=seed,
            method=method,
            mechanism=args.mechanism,
            sigma_center=args.sigma_center,
        )
        outcome = bootstrap_test(data, cfg)
    result = outcome.to_dict()
    result["config"].update(input=str(args.input), header=args.header, naive=args.naive)
    _emit(result)
    return 0


def cmd_ampute(args) -> int:
    seed = _seed(args.seed)
    data = read_csv(args.input, header=args.header)
    probs = _floats(args.probs)
    if args.mechanism == "per-column":
        if len(probs) == 1:
            probs = probs * data.d
        if len(probs) != data.d:
            raise UsageError(f"--probs needs 1 or {data.d} values for per-column")
        spec = PerColumn(tuple(probs))
    else:
        if len(probs) != 2:
            raise UsageError("--probs needs p_row,p_value for row-value")
        spec = RowThenValue(*probs)
    amputed = ampute_mcar(data.filled(0.0), spec, RngStream(seed).generator())
    out = IncompleteMatrix(data.values, data.mask & amputed.mask)
    text = format_csv(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        log.info("wrote %s (seed=%d, mechanism=%s, probs=%s)", args.out, seed, args.mechanism, probs)
    else:
        sys.stdout.write(text)
    return 0


def cmd_null_table(args) -> int:
    seed = _seed(args.seed)
    table = null_quantile_table(args.n, args.d, _floats(args.levels), args.M, RngStream(seed))
    _emit(table.to_dict())
    return 0


def _resolve_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = files("bhep_mcar").joinpath("figures", p.name)
    if bundled.is_file():
        return Path(str(bundled))
    raise UsageError(f"config {path!r} not found")


def cmd_power_study(args) -> int:
    cfg_path = _resolve_config(args.config)
    raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    if args.full:
        raw.update(FULL_SCALE)
    for key in ("N", "B", "seed"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    if "seed" not in raw:
        raw["seed"] = _seed(None)
    grid = load_grid(raw, name=cfg_path.stem)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d cells with parallelism %d", len(grid.configs), args.parallel)
    t0 = time.perf_counter()
    results = run_grid(grid.configs, parallelism=args.parallel)
    elapsed = time.perf_counter() - t0
    (out / "results.csv").write_text(results_to_csv(results), encoding="utf-8")
    figure_files = []
    try:
        emit_figure_data(results, grid.figure, out)
        figure_files = [f"{grid.figure}.csv", f"{grid.figure}.svg"]
    except BhepError as exc:
        log.warning("figure not written: %s", exc)
    manifest = {
        "config": raw,
        "config_file": str(cfg_path),
        "seed": raw["seed"],
        "parallel": args.parallel,
        "cells": len(results),
        "failed_cells": sum(not r.ok for r in results),
        "wall_time_seconds": elapsed,
        "cell_wall_times": [r.wall_time for r in results],
        "outputs": ["results.csv", *figure_files],
        "versions": {
            "bhep_mcar": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    _emit({"out": str(out), "cells": len(results), "failed_cells": manifest["failed_cells"]})
    return 0


def cmd_figure_data(args) -> int:
    rows = read_results_csv(args.results)
    figure_id = args.figure or Path(args.results).stem
    emit_figure_data(rows, figure_id, args.out)
    _emit({"figure": figure_id, "out": str(args.out)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhep-mcar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def csv_input(p):
        p.add_argument("--input", required=True, help="CSV file; empty or NA cells are missing")
        p.add_argument("--header", action="store_true", help="skip one header line")

    p = sub.add_parser("test", help="bootstrap test of multivariate normality")
    csv_input(p)
    p.add_argument("--method", default="complete-case", help="complete-case | mean | median | knn<k>")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--B", type=int, default=1000, help="bootstrap cycles")
    p.add_argument("--seed", type=int, default=None, help="defaults to $BHEP_SEED, then 0")
    p.add_argument("--naive", action="store_true", help="impute and use complete-data null quantiles")
    p.add_argument("--M", type=int, default=10_000, help="null draws for --naive")
    p.add_argument("--mechanism", choices=MECHANISMS, default="per-column")
    p.add_argument("--sigma-center", choices=SIGMA_CENTERS, default="complete-case")
    p.add_argument("--knn-aggregate", choices=("mean", "median"), default="mean")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ampute", help="delete values completely at random")
    csv_input(p)
    p.add_argument("--mechanism", choices=MECHANISMS, default="per-column")
    p.add_argument(
        "--probs",
        required=True,
        help="per-column: observation probabilities q1,...,qd (or one for all); row-value: p_row,p_value",
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_ampute)

    p = sub.add_parser("null-table", help="Monte Carlo null quantiles of the complete-data statistic")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--M", type=int, default=10_000)
    p.add_argument("--levels", default="0.5,0.9,0.95,0.99")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_null_table)

    p = sub.add_parser("power-study", help="run a simulation grid from a JSON config")
    p.add_argument("--config", required=True, help="grid JSON, or the name of a bundled figures/*.json")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--full", action="store_true", help="N=2000, B=1000")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--B", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_power_study)

    p = sub.add_parser("figure-data", help="figure CSV/SVG from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--figure", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_figure_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, BhepError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        sys.stderr.write(f"internal error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
