"""Monte Carlo size and power study.

A *cell* fixes the data-generating law, the sample size, the MCAR
mechanism and the testing approach; :func:`run_cell` estimates its
rejection rate from ``N`` replicates.  All randomness is addressed by
index: replicate ``i`` of a cell draws from
``RngStream(seed, (data_key, i))`` where ``data_key`` hashes only the
data-generating part of the cell.  Approaches that share a data key
therefore see the same samples and the same bootstrap streams, and results
do not depend on the order or process in which work items run.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .bhep import simulate_null
from .bootstrap import (
    CYCLE_ERRORS,
    Approach,
    BootstrapConfig,
    CompleteCase,
    DegenerateBootstrap,
    bootstrap_test,
    naive_test,
    parse_approach,
)
from .dataset import MissingnessSpec, PerColumn, RowThenValue, ampute_mcar
from .errors import AllReplicatesFailed, BhepError, IncompleteGrid, InvalidConfig
from .imputation import ImputationMethod, Knn, Mean, Median, parse_method
from .numerics import SIGMA1, SIGMA2, GaussianParams, RngStream, sample_mvn, sample_mvt

NAMED_MATRICES = {"sigma1": SIGMA1, "sigma2": SIGMA2}
NULL_TABLE_KEY = 0x6E756C6C  # separate stream family for null tables
DEFAULT_CHUNK = 25


# --- distributions and approaches --------------------------------------------


def _matrix_name(m: np.ndarray) -> str:
    if np.array_equal(m, np.eye(m.shape[0])):
        return f"I{m.shape[0]}"
    for name, ref in NAMED_MATRICES.items():
        if m.shape == ref.shape and np.array_equal(m, ref):
            return name
    return "custom"


@dataclass(frozen=True)
class Normal:
    params: GaussianParams

    @property
    def d(self) -> int:
        return self.params.dim

    @property
    def label(self) -> str:
        return f"normal({_matrix_name(self.params.sigma)})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_mvn(self.params, n, rng)

    def to_dict(self) -> dict:
        return {"type": "normal", "mean": self.params.mu.tolist(), "cov": self.params.sigma.tolist()}


@dataclass(frozen=True)
class StudentT:
    dof: float
    scale: np.ndarray

    def __post_init__(self):
        scale = np.array(self.scale, dtype=float)
        GaussianParams(np.zeros(scale.shape[0]), scale)  # validates
        scale.flags.writeable = False
        object.__setattr__(self, "scale", scale)

    @property
    def d(self) -> int:
        return self.scale.shape[0]

    @property
    def label(self) -> str:
        return f"t{self.dof:g}({_matrix_name(self.scale)})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_mvt(self.dof, self.scale, n, rng)

    def to_dict(self) -> dict:
        return {"type": "t", "dof": self.dof, "scale": self.scale.tolist()}


Distribution = Union[Normal, StudentT]


@dataclass(frozen=True)
class NaiveImputed:
    """Impute, then use complete-data null quantiles (the misuse)."""

    method: ImputationMethod

    @property
    def label(self) -> str:
        return "naive-" + self.method.label


HarnessApproach = Union[CompleteCase, Mean, Median, Knn, NaiveImputed]


def parse_harness_approach(name: str, knn_aggregate: str = "mean") -> HarnessApproach:
    key = name.strip().lower()
    if key.startswith("naive-"):
        return NaiveImputed(parse_method(key[len("naive-"):], knn_aggregate))
    return parse_approach(key, knn_aggregate)


def _missingness_dict(spec: MissingnessSpec) -> dict:
    if isinstance(spec, PerColumn):
        return {"type": "per-column", "q": list(spec.q)}
    return {"type": "row-value", "p_row": spec.p_row, "p_value": spec.p_value}


def _mechanism(spec: MissingnessSpec) -> str:
    return "per-column" if isinstance(spec, PerColumn) else "row-value"


# --- configs and results -----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the simulation grid."""

    distribution: Distribution
    n: int
    missingness: MissingnessSpec
    approach: HarnessApproach
    N: int = 500
    B: int = 200
    alpha: float = 0.05
    master_seed: int = 0
    M: int = 10_000
    sigma_center: str = "complete-case"

    def __post_init__(self):
        if self.N < 1:
            raise InvalidConfig("must be at least 1", "N")
        if self.B < 1:
            raise InvalidConfig("must be at least 1", "B")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig("must lie in (0, 1)", "alpha")
        if self.n < self.d + 2:
            raise InvalidConfig(f"must be at least d + 2 = {self.d + 2}", "n")
        if isinstance(self.missingness, PerColumn) and len(self.missingness.q) != self.d:
            raise InvalidConfig(f"needs {self.d} probabilities", "missingness.q")

    @property
    def d(self) -> int:
        return self.distribution.d

    @property
    def data_key(self) -> int:
        """Stable 63-bit key of the data-generating part of the cell."""
        blob = json.dumps(
            {
                "distribution": self.distribution.to_dict(),
                "n": self.n,
                "missingness": _missingness_dict(self.missingness),
            },
            sort_keys=True,
        )
        return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "big") >> 1

    def bootstrap_config(self) -> BootstrapConfig:
        return BootstrapConfig(
            B=self.B,
            alpha=self.alpha,
            master_seed=self.master_seed,
            method=self.approach,
            mechanism=_mechanism(self.missingness),
            sigma_center=self.sigma_center,
        )

    def row(self) -> dict:
        return {
            "distribution": self.distribution.label,
            "d": self.d,
            "n": self.n,
            "missingness": self.missingness.label,
            "approach": self.approach.label,
            "N": self.N,
            "B": self.B if not isinstance(self.approach, NaiveImputed) else 0,
            "alpha": self.alpha,
            "seed": self.master_seed,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rejection_rate: float
    standard_error: float
    replicates_failed: int
    n_effective: int
    wall_time: float
    decisions: np.ndarray = field(repr=False, default=None)
    p_values: np.ndarray = field(repr=False, default=None)
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    def row(self) -> dict:
        out = self.config.row()
        out.update(
            rejection_rate=self.rejection_rate,
            standard_error=self.standard_error,
            n_effective=self.n_effective,
            replicates_failed=self.replicates_failed,
            error=self.error,
        )
        return out


CSV_FIELDS = [
    "distribution", "d", "n", "missingness", "approach", "N", "B", "alpha", "seed",
    "rejection_rate", "standard_error", "n_effective", "replicates_failed", "error",
]


# --- running -----------------------------------------------------------------


@lru_cache(maxsize=16)
def _null_draws(n: int, d: int, M: int, seed: int) -> np.ndarray:
    return simulate_null(n, d, M, RngStream(seed, (NULL_TABLE_KEY, n, d)).generator())


def run_replicate(cfg: ExperimentConfig, i: int) -> tuple[int, float]:
    """Decision (1 reject, 0 accept, -1 failed) and p-value of replicate ``i``."""
    stream = RngStream(cfg.master_seed, (cfg.data_key, i))
    gen = stream.child(0).generator()
    x = cfg.distribution.sample(cfg.n, gen)
    data = ampute_mcar(x, cfg.missingness, gen)
    try:
        if isinstance(cfg.approach, NaiveImputed):
            null = _null_draws(cfg.n, cfg.d, cfg.M, cfg.master_seed)
            outcome = naive_test(data, cfg.approach.method, null, cfg.alpha)
        else:
            outcome = bootstrap_test(data, cfg.bootstrap_config(), stream.child(1))
    except CYCLE_ERRORS + (DegenerateBootstrap,):
        return -1, math.nan
    return int(outcome.reject), outcome.p_value


def _run_chunk(cfg: ExperimentConfig, lo: int, hi: int):
    t0 = time.perf_counter()
    out = [run_replicate(cfg, i) for i in range(lo, hi)]
    return out, time.perf_counter() - t0


def _summarize(cfg: ExperimentConfig, outcomes, wall: float) -> ExperimentResult:
    decisions = np.array([o[0] for o in outcomes], dtype=np.int8)
    p_values = np.array([o[1] for o in outcomes], dtype=float)
    ok = decisions >= 0
    n_eff = int(ok.sum())
    failed = int(cfg.N - n_eff)
    if n_eff == 0:
        raise AllReplicatesFailed(f"all {cfg.N} replicates failed")
    rate = float(decisions[ok].mean())
    se = math.sqrt(rate * (1.0 - rate) / n_eff)
    return ExperimentResult(cfg, rate, se, failed, n_eff, wall, decisions, p_values)


def run_cell(cfg: ExperimentConfig) -> ExperimentResult:
    """Estimate the rejection rate of one cell."""
    outcomes, wall = _run_chunk(cfg, 0, cfg.N)
    return _summarize(cfg, outcomes, wall)


def _failed_result(cfg: ExperimentConfig, exc: Exception) -> ExperimentResult:
    return ExperimentResult(cfg, math.nan, math.nan, cfg.N, 0, 0.0, error=f"{type(exc).__name__}: {exc}")


def run_grid(
    configs: Sequence[ExperimentConfig], parallelism: int = 1, chunk: int = DEFAULT_CHUNK
) -> list[ExperimentResult]:
    """Run every cell; results come back in input order.

    Replicates are split into chunks of ``chunk`` and executed by a pool of
    ``parallelism`` worker processes.  Output does not depend on
    ``parallelism`` or ``chunk``.  A cell that fails is reported with its
    ``error`` set and the grid continues.
    """
    configs = list(configs)
    if not configs:
        raise InvalidConfig("grid is empty")
    jobs = [(c, lo, min(lo + chunk, cfg.N)) for c, cfg in enumerate(configs) for lo in range(0, cfg.N, chunk)]
    if parallelism <= 1:
        done = [_run_chunk(configs[c], lo, hi) for c, lo, hi in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_run_chunk, configs[c], lo, hi) for c, lo, hi in jobs]
            done = [f.result() for f in futures]
    per_cell = [([], 0.0) for _ in configs]
    for (c, _, _), (outs, wall) in zip(jobs, done):
        per_cell[c][0].extend(outs)
        per_cell[c] = (per_cell[c][0], per_cell[c][1] + wall)
    results = []
    for cfg, (outs, wall) in zip(configs, per_cell):
        try:
            results.append(_summarize(cfg, outs, wall))
        except BhepError as exc:
            results.append(_failed_result(cfg, exc))
    return results


def results_to_csv(results: Sequence[ExperimentResult]) -> str:
    """One row per cell.  Wall times are left out so reruns compare byte for byte."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        row = r.row()
        for k in ("rejection_rate", "standard_error", "alpha"):
            row[k] = repr(float(row[k]))
        writer.writerow(row)
    return buf.getvalue()


# --- config files ------------------------------------------------------------


def _parse_matrix(raw, d: int, path: str) -> np.ndarray:
    if raw is None or raw == "identity":
        return np.eye(d)
    if isinstance(raw, str):
        if raw not in NAMED_MATRICES:
            raise InvalidConfig(f"unknown matrix name {raw!r}", path)
        m = NAMED_MATRICES[raw]
    else:
        m = np.asarray(raw, dtype=float)
    if m.shape != (d, d):
        raise InvalidConfig(f"expected a {d}x{d} matrix", path)
    return m


def parse_distribution(raw: dict, path: str = "distributions[0]") -> Distribution:
    if not isinstance(raw, dict) or "type" not in raw:
        raise InvalidConfig("must be an object with a 'type'", path)
    kind = raw["type"]
    matrix = raw.get("cov", raw.get("scale"))
    if "d" in raw:
        d = int(raw["d"])
    elif isinstance(matrix, str) and matrix in NAMED_MATRICES:
        d = NAMED_MATRICES[matrix].shape[0]
    elif isinstance(matrix, list):
        d = len(matrix)
    else:
        raise InvalidConfig("cannot infer the dimension; give 'd'", path)
    try:
        if kind == "normal":
            mean = np.asarray(raw.get("mean", np.zeros(d)), dtype=float)
            return Normal(GaussianParams(mean, _parse_matrix(matrix, d, path + ".cov")))
        if kind == "t":
            if "dof" not in raw:
                raise InvalidConfig("missing 'dof'", path)
            return StudentT(float(raw["dof"]), _parse_matrix(matrix, d, path + ".scale"))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(str(exc), path) from None
    raise InvalidConfig(f"unknown distribution type {kind!r}", path + ".type")


def parse_missingness(raw: dict, d: int, path: str = "missingness[0]") -> MissingnessSpec:
    if not isinstance(raw, dict) or "type" not in raw:
        raise InvalidConfig("must be an object with a 'type'", path)
    try:
        if raw["type"] == "per-column":
            q = raw.get("q")
            if q is None:
                raise InvalidConfig("missing 'q'", path)
            q = [float(q)] * d if np.isscalar(q) else list(q)
            if len(q) != d:
                raise InvalidConfig(f"needs {d} probabilities", path + ".q")
            try:
                return PerColumn(tuple(float(v) for v in q))
            except ValueError as exc:
                raise InvalidConfig(str(exc), path + ".q") from None
        if raw["type"] == "row-value":
            return RowThenValue(float(raw["p_row"]), float(raw["p_value"]))
    except KeyError as exc:
        raise InvalidConfig(f"missing {exc}", path) from None
    except ValueError as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(str(exc), path) from None
    raise InvalidConfig(f"unknown mechanism {raw['type']!r}", path + ".type")


@dataclass
class GridSpec:
    configs: list[ExperimentConfig]
    figure: str
    raw: dict


def load_grid(raw: dict | str | Path, name: str = "grid") -> GridSpec:
    """Expand a JSON grid description into cell configs.

    The grid is the product ``distributions x ns x missingness x
    approaches``, with shared ``N``, ``B``, ``alpha``, ``seed`` (and
    optionally ``M`` for naive approaches and ``sigma_center``).
    """
    if not isinstance(raw, dict):
        path = Path(raw)
        name = path.stem
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"not valid JSON: {exc}") from None
    for key in ("distributions", "ns", "missingness", "approaches"):
        if not isinstance(raw.get(key), list) or not raw[key]:
            raise InvalidConfig("must be a non-empty list", key)
    common = {}
    for key, cast in (("N", int), ("B", int), ("alpha", float), ("M", int)):
        if key in raw:
            common[key] = cast(raw[key])
    if "seed" in raw:
        common["master_seed"] = int(raw["seed"])
    if "sigma_center" in raw:
        common["sigma_center"] = raw["sigma_center"]
    knn_aggregate = raw.get("knn_aggregate", "mean")
    configs = []
    for i, draw in enumerate(raw["distributions"]):
        dist = parse_distribution(draw, f"distributions[{i}]")
        for j, n in enumerate(raw["ns"]):
            for k, miss in enumerate(raw["missingness"]):
                spec = parse_missingness(miss, dist.d, f"missingness[{k}]")
                for m, app in enumerate(raw["approaches"]):
                    try:
                        approach = parse_harness_approach(app, knn_aggregate)
                    except ValueError as exc:
                        raise InvalidConfig(str(exc), f"approaches[{m}]") from None
                    try:
                        configs.append(ExperimentConfig(dist, int(n), spec, approach, **common))
                    except InvalidConfig as exc:
                        raise InvalidConfig(str(exc), f"ns[{j}]" if exc.path == "n" else exc.path) from None
    return GridSpec(configs, str(raw.get("figure", name)), raw)


# --- figures -----------------------------------------------------------------

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
FIGURE_FIELDS = ["figure", "series", "approach", "missingness", "distribution", "n", "rejection_rate", "standard_error"]


def _figure_rows(results) -> list[dict]:
    rows = []
    for r in results:
        row = r.row() if isinstance(r, ExperimentResult) else dict(r)
        rows.append(
            {
                "approach": str(row["approach"]),
                "missingness": str(row["missingness"]),
                "distribution": str(row["distribution"]),
                "n": int(row["n"]),
                "rejection_rate": float(row["rejection_rate"]),
                "standard_error": float(row["standard_error"]),
                "ok": not row.get("error") and math.isfinite(float(row["rejection_rate"])),
            }
        )
    return rows


def emit_figure_data(results, figure_id: str, out_dir: str | Path | None = None) -> tuple[str, str]:
    """Plot-ready CSV and a minimal SVG line chart of rejection rate vs n.

    ``results`` are :class:`ExperimentResult` objects or rows read back
    from :func:`results_to_csv`.  One series per approach (and per
    missingness level or distribution when the results span several).
    Returns ``(csv_text, svg_text)`` and writes ``<figure_id>.csv`` and
    ``<figure_id>.svg`` when ``out_dir`` is given.

    Raises
    ------
    IncompleteGrid
        If ``results`` is empty or some series lacks a sample size that
        another series has (failed cells count as missing).
    """
    rows = _figure_rows(results)
    if not rows:
        raise IncompleteGrid("no results to plot")
    multi_dist = len({r["distribution"] for r in rows}) > 1
    multi_miss = len({r["missingness"] for r in rows}) > 1
    groups: dict[tuple, dict[int, dict]] = {}
    for r in rows:
        cells = groups.setdefault((r["approach"], r["missingness"], r["distribution"]), {})
        if r["ok"]:
            cells[r["n"]] = r

    def name(key):
        parts = [key[0]]
        if multi_miss:
            parts.append(key[1])
        if multi_dist:
            parts.append(key[2])
        return " ".join(parts)

    ns = sorted({r["n"] for r in rows})
    missing = [(name(key), n) for key, cells in groups.items() for n in ns if n not in cells]
    if missing:
        raise IncompleteGrid(f"{len(missing)} cell(s) missing: {missing}", missing)

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FIGURE_FIELDS, lineterminator="\n")
    writer.writeheader()
    for key, cells in groups.items():
        for n in ns:
            writer.writerow(
                {
                    "figure": figure_id,
                    "series": name(key),
                    "approach": key[0],
                    "missingness": key[1],
                    "distribution": key[2],
                    "n": n,
                    "rejection_rate": repr(cells[n]["rejection_rate"]),
                    "standard_error": repr(cells[n]["standard_error"]),
                }
            )
    csv_text = buf.getvalue()
    series = [(name(k), [cells[n]["rejection_rate"] for n in ns]) for k, cells in groups.items()]
    svg_text = _render_svg(figure_id, ns, series)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{figure_id}.csv").write_text(csv_text, encoding="utf-8")
        (out / f"{figure_id}.svg").write_text(svg_text, encoding="utf-8")
    return csv_text, svg_text


def read_results_csv(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _render_svg(title: str, ns: list[int], series: list[tuple[str, list[float]]]) -> str:
    width, height = 720, 420
    left, right, top, bottom = 60, 200, 40, 50
    pw, ph = width - left - right, height - top - bottom
    ymax = max(0.1, max(max(v) for _, v in series))
    ymax = math.ceil(ymax * 10) / 10
    xmin, xmax = ns[0], ns[-1] if ns[-1] > ns[0] else ns[0] + 1

    def px(n):
        return left + (n - xmin) / (xmax - xmin) * pw

    def py(v):
        return top + ph - v / ymax * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for n in ns:
        x = px(n)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{n}</text>')
    steps = 5
    for s in range(steps + 1):
        v = ymax * s / steps
        y = py(v)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">sample size n</text>')
    out.append(
        f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {top + ph / 2:.1f})">rejection rate</text>'
    )
    for idx, (label, values) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{px(n):.1f},{py(v):.1f}" for n, v in zip(ns, values))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 14 + 18 * idx
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
