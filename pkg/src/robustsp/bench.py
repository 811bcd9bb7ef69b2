"""Benchmark protocol: train/eval scenario split, random pairs, sweep, metrics.

Uncertainty sets are fitted on every second scenario; the returned paths are
then evaluated against all scenarios with plain dot products. Aggregation
reports, per method, the overall average, the average per-pair worst case,
the average per-pair tail mean, and the average fractional rank across all
(pair, scenario) cells.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np
from scipy.stats import rankdata

from .errors import BudgetExceeded, ConfigError, EmptyReport, NoConnectedPairs, NoPath
from .graph import Graph, reachable_from
from .ingest import ScenarioMatrix
from .uncertainty import build_model
from .solvers import solve

__all__ = [
    "ExperimentConfig", "BenchmarkReport", "MethodMetrics", "default_grids",
    "split_scenarios", "sample_pairs", "run_benchmark", "aggregate",
    "write_results", "read_results", "write_metrics",
]

RESULTS_HEADER = ["method", "param", "pair_id", "source", "target",
                  "scenario_id", "objective"]
METRICS_HEADER = ["method", "param", "avg", "avg_worst", "avg_cvar",
                  "avg_rank", "failed_cells"]


def default_grids() -> dict[str, list[float]]:
    """The benchmark's 20-point parameter grid for each of the six families."""
    return {
        "ch": [i / 10 for i in range(1, 21)],
        "interval": [i / 10 for i in range(1, 21)],
        "ellipsoid": [i / 5 for i in range(1, 21)],
        "budgeted": [float(5 * i) for i in range(1, 21)],
        "ph": [float(2 * i - 1) for i in range(1, 21)],
        "sph": [float(i) for i in range(1, 21)],
    }


@dataclass
class ExperimentConfig:
    seed: int = 0
    pair_count: int = 200
    grids: dict[str, list[float]] = field(default_factory=default_grids)
    cvar_fraction: float = 0.05
    train_split: str = "even"

    def validate(self) -> None:
        if self.pair_count < 1:
            raise ConfigError("pair_count must be >= 1")
        if not 0 < self.cvar_fraction <= 1:
            raise ConfigError("cvar_fraction must be in (0, 1]")
        if self.train_split != "even":
            raise ConfigError(f"unknown train_split rule {self.train_split!r}")
        if not self.grids:
            raise ConfigError("grids must not be empty")
        for family, grid in self.grids.items():
            if not grid:
                raise ConfigError(f"grid for {family!r} is empty")

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "pair_count": self.pair_count,
                           "grids": self.grids, "cvar_fraction": self.cvar_fraction,
                           "train_split": self.train_split}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError("config must be a JSON object")
        known = {"seed", "pair_count", "grids", "cvar_fraction", "train_split"}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        config = cls(**payload)
        config.validate()
        return config


@dataclass
class MethodMetrics:
    method: str
    param: float
    avg: float
    avg_worst: float
    avg_cvar: float
    avg_rank: float
    failed_cells: int


@dataclass
class BenchmarkReport:
    methods: list[tuple[str, float]]
    pairs: list[tuple[int, int]]
    scenario_count: int
    values: np.ndarray  # (method, pair, scenario); NaN rows mark failed cells
    failed: list[tuple[int, int, str]]
    cvar_fraction: float = 0.05

    def record_count(self) -> int:
        return int(np.isfinite(self.values).sum())


def split_scenarios(matrix: ScenarioMatrix) -> tuple[ScenarioMatrix, ScenarioMatrix]:
    """Train on scenarios at even ordinals, evaluate on all of them."""
    if matrix.scenario_count < 2:
        raise ValueError("need at least 2 scenarios to split")
    train = ScenarioMatrix(matrix.values[0::2].copy(),
                           list(matrix.scenario_labels[0::2]))
    return train, matrix


def sample_pairs(graph: Graph, count: int, seed: int) -> list[tuple[int, int]]:
    """Uniform reachable ordered pairs via rejection sampling; seeded."""
    if graph.node_count < 2:
        raise NoConnectedPairs("graph has fewer than 2 nodes")
    masks = [reachable_from(graph, s) for s in range(graph.node_count)]
    if not any(mask.sum() > 1 for mask in masks):
        raise NoConnectedPairs("no ordered pair (s, t) with t reachable from s")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[int, int]] = []
    while len(pairs) < count:
        s = int(rng.integers(graph.node_count))
        t = int(rng.integers(graph.node_count))
        if s != t and masks[s][t]:
            pairs.append((s, t))
    return pairs


def _validate_grids(config: ExperimentConfig, n_train: int) -> None:
    for family, grid in config.grids.items():
        if family == "ph":
            bad = [p for p in grid if not (1 <= p <= n_train and float(p).is_integer())]
            if bad:
                raise ConfigError(f"ph columns {bad} invalid for {n_train} train scenarios")
        elif family == "sph":
            cap = n_train // 2 + 1
            bad = [p for p in grid if not (1 <= p <= cap and float(p).is_integer())]
            if bad:
                raise ConfigError(f"sph columns {bad} invalid for {n_train} train scenarios "
                                  f"(max {cap})")
        elif family in ("ch", "interval", "ellipsoid", "ellipsoid-diag", "budgeted"):
            bad = [p for p in grid if p < 0]
            if bad:
                raise ConfigError(f"{family} parameters must be nonnegative, got {bad}")
        else:
            raise ConfigError(f"unknown family {family!r} in grids")


_WORKER: dict = {}


def _init_worker(graph: Graph, train: np.ndarray, eval_values: np.ndarray,
                 pairs: list[tuple[int, int]]) -> None:
    _WORKER["graph"] = graph
    _WORKER["train"] = train
    _WORKER["eval"] = eval_values
    _WORKER["pairs"] = pairs


def _solve_method(task: tuple[int, str, float]):
    """Solve one (family, parameter) method over all pairs; NaN marks failures."""
    method_idx, family, param = task
    graph: Graph = _WORKER["graph"]
    eval_values: np.ndarray = _WORKER["eval"]
    pairs = _WORKER["pairs"]
    model = build_model(family, _WORKER["train"], param)
    out = np.full((len(pairs), eval_values.shape[0]), np.nan)
    failed: list[tuple[int, str]] = []
    for pair_idx, (s, t) in enumerate(pairs):
        try:
            solution = solve(graph, model, s, t)
        except (BudgetExceeded, NoPath) as exc:
            failed.append((pair_idx, f"{type(exc).__name__}: {exc}"))
            continue
        arcs = list(solution.path.arc_indices)
        out[pair_idx] = eval_values[:, arcs].sum(axis=1)
    return method_idx, out, failed


def run_benchmark(config: ExperimentConfig, graph: Graph, matrix: ScenarioMatrix,
                  threads: int = 1) -> BenchmarkReport:
    """Fit every (family, parameter) on the train split, solve all pairs,
    evaluate returned paths under every scenario.

    Solver budget errors are recorded as failed cells and excluded from the
    values array rather than aborting the sweep. Results are deterministic
    for a fixed config regardless of ``threads``.
    """
    config.validate()
    if matrix.arc_count != graph.arc_count:
        raise ConfigError(f"scenario matrix has {matrix.arc_count} arcs, "
                          f"graph has {graph.arc_count}")
    train, eval_matrix = split_scenarios(matrix)
    _validate_grids(config, train.scenario_count)
    pairs = sample_pairs(graph, config.pair_count, config.seed)
    methods = [(family, float(param))
               for family, grid in config.grids.items() for param in grid]
    tasks = [(i, family, param) for i, (family, param) in enumerate(methods)]

    values = np.full((len(methods), len(pairs), eval_matrix.scenario_count), np.nan)
    failed: list[tuple[int, int, str]] = []
    if threads <= 0:
        threads = os.cpu_count() or 1
    if threads == 1:
        _init_worker(graph, train.values, eval_matrix.values, pairs)
        results = map(_solve_method, tasks)
        for method_idx, out, method_failed in results:
            values[method_idx] = out
            failed.extend((method_idx, p, reason) for p, reason in method_failed)
    else:
        with ProcessPoolExecutor(
                max_workers=threads, initializer=_init_worker,
                initargs=(graph, train.values, eval_matrix.values, pairs)) as pool:
            for method_idx, out, method_failed in pool.map(_solve_method, tasks):
                values[method_idx] = out
                failed.extend((method_idx, p, reason) for p, reason in method_failed)
    failed.sort()
    return BenchmarkReport(methods, pairs, eval_matrix.scenario_count, values,
                           failed, cvar_fraction=config.cvar_fraction)


def aggregate(report: BenchmarkReport) -> list[MethodMetrics]:
    """Per-method metrics; failed cells are excluded and counted.

    avg averages every record; avg_worst and avg_cvar average the per-pair
    maximum and per-pair tail mean (the ceil(cvar_fraction * N) largest
    values); avg_rank averages the method's fractional rank over all
    (pair, scenario) cells, ranking only the methods present at each cell.
    """
    if report.values.size == 0 or not np.isfinite(report.values).any():
        raise EmptyReport("benchmark report contains no records")
    n_scen = report.scenario_count
    k_tail = math.ceil(report.cvar_fraction * n_scen)
    ranks = rankdata(report.values, method="average", axis=0, nan_policy="omit")

    rows: list[MethodMetrics] = []
    for m, (family, param) in enumerate(report.methods):
        vals = report.values[m]  # (pair, scenario)
        present = np.isfinite(vals).all(axis=1)
        n_failed = int((~present).sum())
        if not present.any():
            rows.append(MethodMetrics(family, param, float("nan"), float("nan"),
                                      float("nan"), float("nan"), n_failed))
            continue
        kept = vals[present]
        avg = float(kept.mean())
        avg_worst = float(kept.max(axis=1).mean())
        tail = np.sort(kept, axis=1)[:, n_scen - k_tail:]
        avg_cvar = float(tail.mean(axis=1).mean())
        avg_rank = float(np.nanmean(ranks[m]))
        rows.append(MethodMetrics(family, param, avg, avg_worst, avg_cvar,
                                  avg_rank, n_failed))
    return rows


def write_results(report: BenchmarkReport, path: str | FilePath) -> None:
    """Long-form record CSV; failed cells emit no rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for m, (family, param) in enumerate(report.methods):
            for p, (s, t) in enumerate(report.pairs):
                row_vals = report.values[m, p]
                if not np.isfinite(row_vals).all():
                    continue
                for scen_id in range(report.scenario_count):
                    writer.writerow([family, repr(float(param)), p, s, t, scen_id,
                                     repr(float(row_vals[scen_id]))])


def read_results(path: str | FilePath) -> BenchmarkReport:
    """Rebuild a report from a results CSV; absent (method, pair) cells are failed."""
    methods: list[tuple[str, float]] = []
    pairs: list[tuple[int, int]] = []
    method_pos: dict[tuple[str, float], int] = {}
    pair_pos: dict[int, int] = {}
    cells: dict[tuple[int, int], dict[int, float]] = {}
    max_scen = -1
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise EmptyReport(f"unexpected results header {header!r}")
        for row in reader:
            if not row:
                continue
            family, param, pair_id, s, t, scen_id, objective = row
            mkey = (family, float(param))
            if mkey not in method_pos:
                method_pos[mkey] = len(methods)
                methods.append(mkey)
            pid = int(pair_id)
            if pid not in pair_pos:
                pair_pos[pid] = len(pairs)
                pairs.append((int(s), int(t)))
            scen = int(scen_id)
            max_scen = max(max_scen, scen)
            cells.setdefault((method_pos[mkey], pair_pos[pid]), {})[scen] = float(objective)
    if not methods:
        raise EmptyReport("results file contains no records")
    n_scen = max_scen + 1
    values = np.full((len(methods), len(pairs), n_scen), np.nan)
    failed: list[tuple[int, int, str]] = []
    for m in range(len(methods)):
        for p in range(len(pairs)):
            cell = cells.get((m, p))
            if cell is None or len(cell) != n_scen:
                failed.append((m, p, "missing records"))
                continue
            for scen, objective in cell.items():
                values[m, p, scen] = objective
    return BenchmarkReport(methods, pairs, n_scen, values, failed)


def write_metrics(rows: list[MethodMetrics], path: str | FilePath) -> None:
    """Metrics CSV sorted by method tag then parameter."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in sorted(rows, key=lambda r: (r.method, r.param)):
            writer.writerow([row.method, repr(float(row.param)), repr(row.avg),
                             repr(row.avg_worst), repr(row.avg_cvar),
                             repr(row.avg_rank), row.failed_cells])
