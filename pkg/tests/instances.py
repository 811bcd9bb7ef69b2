"""Shared builders for randomized solver tests."""

from __future__ import annotations

import numpy as np

from robustsp import Graph, enumerate_simple_paths
from robustsp.errors import TooManyPaths


def diamond() -> Graph:
    # s=0 -> a=1 (arc 0), s -> b=2 (arc 1), a -> t=3 (arc 2), b -> t (arc 3)
    return Graph(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


def line() -> Graph:
    return Graph(3, [(0, 1), (1, 2)])


def random_instance(rng: np.random.Generator, max_nodes: int = 8, max_arcs: int = 16,
                    scen_low: int = 2, scen_high: int = 6, cost_high: float = 10.0):
    """A small connected-enough instance: (graph, scenarios, source, target).

    Retries until the sampled target is reachable and the path count stays
    enumerable, so the brute-force oracle always applies.
    """
    while True:
        n_nodes = int(rng.integers(3, max_nodes + 1))
        n_arcs = int(rng.integers(n_nodes, max_arcs + 1))
        arcs = []
        while len(arcs) < n_arcs:
            tail = int(rng.integers(n_nodes))
            head = int(rng.integers(n_nodes))
            if tail != head:
                arcs.append((tail, head))
        graph = Graph(n_nodes, arcs)
        source, target = 0, n_nodes - 1
        try:
            paths = enumerate_simple_paths(graph, source, target, 50_000)
        except TooManyPaths:
            continue
        if not paths:
            continue
        n_scen = int(rng.integers(scen_low, scen_high + 1))
        scenarios = rng.uniform(0.0, cost_high, size=(n_scen, n_arcs))
        return graph, scenarios, source, target


def all_family_models(scenarios: np.ndarray, scale_points=(0.0, 0.5, 1.0, 1.5, 2.0),
                      budget_points=(0.0, 1.0, 1.5, 3.0, 100.0)):
    """One fitted model per (family, parameter) over the canonical small grids.

    Scale families get the five fixed points; column families span every
    feasible column for the instance's scenario count.
    """
    from robustsp import build_model

    n_scen = scenarios.shape[0]
    models = []
    for lam in scale_points:
        models.append(("ch", lam, build_model("ch", scenarios, lam)))
        models.append(("interval", lam, build_model("interval", scenarios, lam)))
        models.append(("ellipsoid", lam, build_model("ellipsoid", scenarios, lam)))
        models.append(("ellipsoid-diag", lam, build_model("ellipsoid-diag", scenarios, lam)))
    for gamma in budget_points:
        models.append(("budgeted", gamma, build_model("budgeted", scenarios, gamma)))
    for j in range(1, n_scen + 1):
        models.append(("ph", j, build_model("ph", scenarios, j)))
    for k in range(1, n_scen // 2 + 2):
        models.append(("sph", k, build_model("sph", scenarios, k)))
    return models
