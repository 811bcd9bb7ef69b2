"""Exact robust shortest-path solvers, one per uncertainty family.

Every solver returns the minimizer of the worst-case path cost over the
model's uncertainty set, shares the deterministic tie-break rule of
``graph.shortest_path`` (fewer arcs, then lexicographically smallest arc
sequence), and reports its objective through ``worst_case_value`` of the
returned path, so self-consistency holds by construction.

The scenario families (convex hull, permutohull, symmetric permutohull) are
solved by a label-setting search over per-scenario cost vectors ordered by an
admissible ordered-weighted-average bound; the mean/deviation family by
depth-first branch-and-bound. Both fail loudly with a budget error instead of
returning unproven solutions.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    LabelBudgetExceeded,
    NoPath,
    NodeBudgetExceeded,
)
from .graph import (
    Graph,
    Path,
    enumerate_simple_paths,
    forward_distances,
    reverse_distances,
    shortest_path,
)
from .uncertainty import (
    OWA,
    Budgeted,
    ConvexHull,
    Ellipsoid,
    Interval,
    UncertaintyModel,
    cvar_weights,
    worst_case_value,
)

__all__ = [
    "Diagnostics", "RobustSolution",
    "solve_interval", "solve_budgeted", "solve_owa", "solve_ellipsoid",
    "solve_oracle", "solve",
]

PRUNE_EPS = 1e-12


@dataclass
class Diagnostics:
    labels_expanded: int = 0
    nodes_branched: int = 0
    subproblems_solved: int = 0
    wall_time_s: float = 0.0


@dataclass
class RobustSolution:
    path: Path
    objective: float
    method: str
    parameter: float
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def _check_model(graph: Graph, model: UncertaintyModel) -> None:
    if model.dimension != graph.arc_count:
        raise DimensionMismatch(
            f"model dimension {model.dimension} != graph arc count {graph.arc_count}")


def solve_interval(graph: Graph, model: Interval, source: int, target: int) -> RobustSolution:
    """One shortest-path run on the per-arc upper bounds."""
    _check_model(graph, model)
    started = time.perf_counter()
    _, path = shortest_path(graph, model.upper, source, target)
    diag = Diagnostics(subproblems_solved=1, wall_time_s=time.perf_counter() - started)
    return RobustSolution(path, worst_case_value(model, path), "interval", model.scale, diag)


def solve_budgeted(graph: Graph, model: Budgeted, source: int, target: int) -> RobustSolution:
    """Threshold enumeration over the distinct per-arc deviations.

    For every threshold in {0} and the distinct deviations, solve a plain
    shortest path under costs nominal + max(deviation - threshold, 0) and add
    budget * threshold; the best candidate is the robust optimum. The scan
    computes distances only; the winning threshold is re-solved once with the
    tie-broken Dijkstra to extract the path. The enumeration stays exact for
    fractional budgets because every candidate's objective is piecewise linear
    in the threshold with breakpoints only at deviation values.
    """
    _check_model(graph, model)
    started = time.perf_counter()
    deviations = model.upper - model.nominal
    thresholds = np.unique(np.concatenate([[0.0], deviations]))
    best_value = np.inf
    best_theta = 0.0
    for theta in thresholds:
        costs = model.nominal + np.maximum(deviations - theta, 0.0)
        dist = forward_distances(graph, costs, source)[target]
        if not np.isfinite(dist):
            raise NoPath(f"no path from {source} to {target}")
        value = float(dist) + model.budget * float(theta)
        if value < best_value:
            best_value = value
            best_theta = float(theta)
    costs = model.nominal + np.maximum(deviations - best_theta, 0.0)
    _, path = shortest_path(graph, costs, source, target)
    diag = Diagnostics(subproblems_solved=len(thresholds),
                       wall_time_s=time.perf_counter() - started)
    return RobustSolution(path, worst_case_value(model, path), "budgeted", model.budget, diag)


class _OwaBound:
    """Ordered-weighted-average evaluator specialized to the nonzero prefix."""

    def __init__(self, weights: np.ndarray):
        self.weights = weights
        self.nnz = int(np.count_nonzero(weights))
        self.head = weights[:self.nnz]

    def __call__(self, outcomes: np.ndarray) -> float:
        n = outcomes.shape[0]
        if self.nnz == 1:
            return float(outcomes.max() * self.head[0])
        if self.nnz < n:
            top = np.partition(outcomes, n - self.nnz)[n - self.nnz:]
        else:
            top = outcomes
        return float(np.sort(top)[::-1] @ self.head)


def solve_owa(graph: Graph, model: OWA, source: int, target: int,
              node_label_cap: int = 1_000_000,
              total_label_cap: int = 10_000_000,
              prune: bool = True) -> RobustSolution:
    """Label-setting search over per-scenario accumulated cost vectors.

    Labels are explored in lexicographic (bound, arc count, arc sequence)
    order, where the bound adds per-scenario shortest distances to the target
    and evaluates the weighted sorted sum; the bound is admissible and
    consistent because the objective is componentwise nondecreasing. The first
    label popped at the target is therefore optimal and already carries the
    global tie-break. A popped label is discarded when a kept label at its
    node is componentwise less than or equal to it; with ``prune=False`` the
    search enumerates all simple prefixes instead (oracle-grade, exponential).
    """
    _check_model(graph, model)
    started = time.perf_counter()
    scen = model.scenarios
    bound_of = _OwaBound(model.weights)

    # per-scenario distance-to-target tables, stacked (node, scenario)
    lb = np.vstack([reverse_distances(graph, scen[k], target)
                    for k in range(scen.shape[0])]).T.copy()
    if not np.all(np.isfinite(lb[source])):
        raise NoPath(f"no path from {source} to {target}")

    mean_costs = scen.mean(axis=0)
    _, incumbent_path = shortest_path(graph, mean_costs, source, target)
    incumbent_value = worst_case_value(model, incumbent_path)

    root_vec = np.zeros(scen.shape[0])
    heap: list[tuple] = [(bound_of(root_vec + lb[source]), 0, (), source, root_vec,
                          frozenset((source,)) if not prune else None)]
    kept: list[list[np.ndarray]] = [[] for _ in range(graph.node_count)]
    created = 1
    expanded = 0
    while heap:
        bound, narcs, seq, node, vec, visited = heapq.heappop(heap)
        if node == target:
            path = Path(seq, source, target)
            diag = Diagnostics(labels_expanded=expanded,
                               wall_time_s=time.perf_counter() - started)
            return RobustSolution(path, worst_case_value(model, path), "owa",
                                  float("nan"), diag)
        if prune:
            plist = kept[node]
            if any((p <= vec).all() for p in plist):
                continue
            plist.append(vec)
            if len(plist) > node_label_cap:
                raise LabelBudgetExceeded(
                    f"more than {node_label_cap} Pareto labels at node {node}")
        expanded += 1
        for arc in graph.out_arcs[node]:
            head = graph.arcs[arc][1]
            if not prune and head in visited:
                continue
            new_vec = vec + scen[:, arc]
            if prune and head != target and kept[head] and \
                    any((p <= new_vec).all() for p in kept[head]):
                continue
            new_bound = bound_of(new_vec + lb[head])
            if not np.isfinite(new_bound):
                continue  # head cannot reach the target at all
            if prune and new_bound > incumbent_value:
                continue
            created += 1
            if created > total_label_cap:
                raise LabelBudgetExceeded(f"more than {total_label_cap} labels created")
            heapq.heappush(heap, (new_bound, narcs + 1, seq + (arc,), head, new_vec,
                                  None if prune else visited | {head}))
    if prune:
        # Exhaustion means every surviving candidate had a bound above the
        # incumbent, which proves the incumbent optimal (the trim keeps ties).
        diag = Diagnostics(labels_expanded=expanded,
                           wall_time_s=time.perf_counter() - started)
        return RobustSolution(incumbent_path, worst_case_value(model, incumbent_path),
                              "owa", float("nan"), diag)
    raise NoPath(f"no path from {source} to {target}")


def _support_scenario(model: Ellipsoid, arcs: list[int]) -> np.ndarray | None:
    """A cost vector inside the uncertainty set, tangent at the given path.

    For any member c of the set, c @ x lower-bounds the worst case of every
    path x (Cauchy-Schwarz in the covariance inner product), which yields an
    additional admissible branch-and-bound table. The tangent direction is
    shrunk toward the mean if needed to keep all entries nonnegative.
    """
    if model.scale <= 0 or not arcs:
        return None
    direction = model.covariance[:, arcs].sum(axis=1)
    quad = float(direction[arcs].sum())
    if quad <= 1e-30:
        return None
    direction = direction * np.sqrt(model.scale / quad)
    negative = direction < 0
    if negative.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(negative, model.mean / -direction, np.inf)
        alpha = min(1.0, float(np.nanmin(ratios)))
        direction = direction * max(alpha, 0.0)
    return np.maximum(model.mean + direction, 0.0)


def solve_ellipsoid(graph: Graph, model: Ellipsoid, source: int, target: int,
                    node_budget: int = 10_000_000,
                    max_support_tables: int = 8) -> RobustSolution:
    """Depth-first branch-and-bound over partial simple paths.

    The base lower bound is the mean cost of the partial path plus the mean
    shortest distance to the target (the deviation term is nonnegative, so
    dropping it is admissible). Two admissible strengthenings are layered on:
    the accumulated diagonal deviation term in diagonal mode, and tangent
    support scenarios refreshed at every incumbent improvement. Children are
    expanded in increasing bound order; a child is pruned when its bound is
    within 1e-12 of the incumbent.
    """
    _check_model(graph, model)
    started = time.perf_counter()
    mean = model.mean
    rev_mean = reverse_distances(graph, mean, target)
    if not np.isfinite(rev_mean[source]):
        raise NoPath(f"no path from {source} to {target}")

    _, incumbent_path = shortest_path(graph, mean, source, target)
    incumbent_value = worst_case_value(model, incumbent_path)
    diag_var = np.diag(model.covariance) if model.diagonal_only else None

    # support tables: (costs, reverse distances, accumulated prefix cost stack)
    tables: list[list] = []

    def add_table(arcs: list[int], prefix: list[int]) -> None:
        scenario = _support_scenario(model, arcs)
        if scenario is None:
            return
        rev = reverse_distances(graph, scenario, target)
        acc = [0.0]
        for a in prefix:
            acc.append(acc[-1] + scenario[a])
        tables.append([scenario, rev, acc])
        if len(tables) > max_support_tables:
            tables.pop(0)

    if source == target:
        path = Path((), source, target)
        return RobustSolution(path, worst_case_value(model, path), "ellipsoid",
                              model.scale, Diagnostics(wall_time_s=time.perf_counter() - started))

    add_table(list(incumbent_path.arc_indices), [])

    seq: list[int] = []
    mean_acc = [0.0]
    var_acc = [0.0]
    on_path = [False] * graph.node_count
    on_path[source] = True

    def child_bound(arc: int, head: int) -> float:
        base = mean_acc[-1] + mean[arc] + rev_mean[head]
        if diag_var is not None:
            base += np.sqrt(model.scale * (var_acc[-1] + diag_var[arc]))
        for scenario, rev, acc in tables:
            cand = acc[-1] + scenario[arc] + rev[head]
            if cand > base:
                base = cand
        return float(base)

    def children(node: int) -> list[tuple[float, int, int]]:
        out = []
        for arc in graph.out_arcs[node]:
            head = graph.arcs[arc][1]
            if on_path[head]:
                continue
            out.append((child_bound(arc, head), arc, head))
        out.sort()
        return out

    stack: list[tuple[list[tuple[float, int, int]], int]] = [(children(source), 0)]
    branched = 1
    while stack:
        kids, k = stack.pop()
        descended = False
        while k < len(kids):
            bound, arc, head = kids[k]
            k += 1
            if bound >= incumbent_value - PRUNE_EPS:
                continue
            if head == target:
                candidate = Path(tuple(seq) + (arc,), source, target)
                value = worst_case_value(model, candidate)
                if value < incumbent_value:
                    incumbent_value = value
                    incumbent_path = candidate
                    add_table(list(candidate.arc_indices), seq)
                continue
            branched += 1
            if branched > node_budget:
                raise NodeBudgetExceeded(f"more than {node_budget} branch nodes")
            stack.append((kids, k))
            seq.append(arc)
            mean_acc.append(mean_acc[-1] + mean[arc])
            if diag_var is not None:
                var_acc.append(var_acc[-1] + diag_var[arc])
            for table in tables:
                table[2].append(table[2][-1] + table[0][arc])
            on_path[head] = True
            stack.append((children(head), 0))
            descended = True
            break
        if not descended and seq:
            arc = seq.pop()
            mean_acc.pop()
            if diag_var is not None:
                var_acc.pop()
            for table in tables:
                if len(table[2]) > len(seq) + 1:
                    table[2].pop()
            on_path[graph.arcs[arc][1]] = False

    diag = Diagnostics(nodes_branched=branched, wall_time_s=time.perf_counter() - started)
    return RobustSolution(incumbent_path, incumbent_value, "ellipsoid", model.scale, diag)


def solve_oracle(graph: Graph, model: UncertaintyModel, source: int, target: int,
                 max_paths: int = 200_000) -> RobustSolution:
    """Brute force: evaluate every simple path, keep the tie-break minimum."""
    _check_model(graph, model)
    started = time.perf_counter()
    paths = enumerate_simple_paths(graph, source, target, max_paths)
    if not paths:
        raise NoPath(f"no path from {source} to {target}")
    best = None
    best_key = None
    for path in paths:
        key = (worst_case_value(model, path), len(path.arc_indices), path.arc_indices)
        if best_key is None or key < best_key:
            best_key = key
            best = path
    diag = Diagnostics(subproblems_solved=len(paths),
                       wall_time_s=time.perf_counter() - started)
    return RobustSolution(best, best_key[0], "oracle", float("nan"), diag)


def solve(graph: Graph, model: UncertaintyModel, source: int, target: int,
          **caps) -> RobustSolution:
    """Dispatch to the dedicated solver for the model's family."""
    if isinstance(model, Interval):
        return solve_interval(graph, model, source, target)
    if isinstance(model, Budgeted):
        return solve_budgeted(graph, model, source, target)
    if isinstance(model, Ellipsoid):
        return solve_ellipsoid(graph, model, source, target, **caps)
    if isinstance(model, OWA):
        return solve_owa(graph, model, source, target, **caps)
    if isinstance(model, ConvexHull):
        view = OWA(model.scenarios, cvar_weights(model.scenarios.shape[0], 1))
        solution = solve_owa(graph, view, source, target, **caps)
        return RobustSolution(solution.path, worst_case_value(model, solution.path),
                              "ch", model.scale, solution.diagnostics)
    raise TypeError(f"unknown model type {type(model)!r}")
