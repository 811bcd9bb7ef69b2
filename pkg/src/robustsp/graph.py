"""Directed road graph, shortest-path primitives, and exhaustive enumeration.

Arcs are identified by index, never by endpoint pair: road networks contain
parallel arcs and every cost vector, scenario matrix column, and path is
expressed in the shared arc index space.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path as FilePath

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import NoPath, TooManyPaths

__all__ = [
    "Graph",
    "Path",
    "shortest_path",
    "reverse_distances",
    "forward_distances",
    "enumerate_simple_paths",
    "load_graph",
    "save_graph",
    "reachable_from",
]


class Graph:
    """Immutable directed graph over ``node_count`` nodes with indexed arcs.

    ``arcs[i]`` is the (tail, head) pair of arc ``i``; the index is stable and
    shared with every cost vector of length ``len(arcs)``. Self-loops are
    rejected. Instances are safe to share across concurrent tasks.
    """

    def __init__(self, node_count: int, arcs: list[tuple[int, int]],
                 node_coords: list[tuple[float, float]] | None = None):
        if node_count < 0:
            raise ValueError("node_count must be nonnegative")
        for i, (tail, head) in enumerate(arcs):
            if not (0 <= tail < node_count and 0 <= head < node_count):
                raise ValueError(f"arc {i} endpoint out of range: ({tail}, {head})")
            if tail == head:
                raise ValueError(f"arc {i} is a self-loop at node {tail}")
        self.node_count = node_count
        self.arcs = [(int(t), int(h)) for t, h in arcs]
        self.node_coords = node_coords
        self._tails = np.array([a[0] for a in self.arcs], dtype=np.int64)
        self._heads = np.array([a[1] for a in self.arcs], dtype=np.int64)
        # adjacency by arc index, ascending (drives all deterministic tie-breaks)
        out: list[list[int]] = [[] for _ in range(node_count)]
        into: list[list[int]] = [[] for _ in range(node_count)]
        for i, (tail, head) in enumerate(self.arcs):
            out[tail].append(i)
            into[head].append(i)
        self.out_arcs = out
        self.in_arcs = into

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    def __repr__(self) -> str:
        return f"Graph(nodes={self.node_count}, arcs={self.arc_count})"

    @cached_property
    def _forward_pattern(self):
        return _build_pattern(self._tails, self._heads, self.node_count)

    @cached_property
    def _reverse_pattern(self):
        return _build_pattern(self._heads, self._tails, self.node_count)


def _build_pattern(rows: np.ndarray, cols: np.ndarray, n: int):
    """CSR sparsity pattern with a reduction map for parallel arcs.

    Returns (indptr, indices, slot_of_arc, slot_count): parallel arcs share a
    slot, so per-call data is built by a minimum-reduction over arc costs.
    """
    m = len(rows)
    if m == 0:
        return (np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.int64), 0)
    order = np.lexsort((cols, rows))
    r, c = rows[order], cols[order]
    first = np.ones(m, dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    slot_ids = np.cumsum(first) - 1
    slot_of_arc = np.empty(m, dtype=np.int64)
    slot_of_arc[order] = slot_ids
    indices = c[first]
    slot_rows = r[first]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, slot_rows + 1, 1)
    indptr = np.cumsum(indptr)
    return indptr, indices, slot_of_arc, int(first.sum())


def _pattern_matrix(pattern, costs: np.ndarray, n: int) -> csr_matrix:
    indptr, indices, slot_of_arc, slot_count = pattern
    data = np.full(slot_count, np.inf)
    np.minimum.at(data, slot_of_arc, costs)
    return csr_matrix((data, indices, indptr), shape=(n, n))


@dataclass(frozen=True)
class Path:
    """A simple s-t path as an ordered tuple of arc indices."""

    arc_indices: tuple[int, ...]
    source: int
    target: int

    def __len__(self) -> int:
        return len(self.arc_indices)

    def node_sequence(self, graph: Graph) -> list[int]:
        nodes = [self.source]
        for a in self.arc_indices:
            nodes.append(graph.arcs[a][1])
        return nodes

    def validate(self, graph: Graph) -> None:
        """Raise ValueError unless arcs are incident, simple, and s/t match."""
        if not self.arc_indices:
            if self.source != self.target:
                raise ValueError("empty path requires source == target")
            return
        if graph.arcs[self.arc_indices[0]][0] != self.source:
            raise ValueError("first arc does not leave the source")
        if graph.arcs[self.arc_indices[-1]][1] != self.target:
            raise ValueError("last arc does not enter the target")
        nodes = self.node_sequence(graph)
        for k in range(len(self.arc_indices) - 1):
            if graph.arcs[self.arc_indices[k]][1] != graph.arcs[self.arc_indices[k + 1]][0]:
                raise ValueError(f"arcs {k} and {k + 1} are not incident")
        if len(set(nodes)) != len(nodes):
            raise ValueError("path repeats a node")

    def cost(self, costs: np.ndarray) -> float:
        return float(sum(costs[a] for a in self.arc_indices))


def _check_costs(graph: Graph, costs) -> np.ndarray:
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (graph.arc_count,):
        raise ValueError(f"cost vector length {costs.shape} != arc count {graph.arc_count}")
    if not np.all(np.isfinite(costs)) or np.any(costs < 0):
        raise ValueError("costs must be finite and nonnegative")
    return costs


def shortest_path(graph: Graph, costs, source: int, target: int) -> tuple[float, Path]:
    """Minimum-cost simple path under the global tie-break rule.

    Ties on cost are broken by fewer arcs, then by the lexicographically
    smallest arc-index sequence, so repeated calls are bit-identical. Labels
    carry (cost, arc count, arc sequence) and Dijkstra's argument applies to
    the lexicographic order because every extension grows each component.
    """
    costs = _check_costs(graph, costs)
    if not (0 <= source < graph.node_count and 0 <= target < graph.node_count):
        raise ValueError("source/target out of range")
    if source == target:
        return 0.0, Path((), source, target)

    best: dict[int, tuple[float, int, tuple[int, ...]]] = {source: (0.0, 0, ())}
    settled = [False] * graph.node_count
    heap: list[tuple[float, int, tuple[int, ...], int]] = [(0.0, 0, (), source)]
    while heap:
        dist, narcs, seq, node = heapq.heappop(heap)
        if settled[node]:
            continue
        settled[node] = True
        if node == target:
            return dist, Path(seq, source, target)
        for arc in graph.out_arcs[node]:
            head = graph.arcs[arc][1]
            if settled[head]:
                continue
            key = (dist + costs[arc], narcs + 1, seq + (arc,))
            if head not in best or key < best[head]:
                best[head] = key
                heapq.heappush(heap, key + (head,))
    raise NoPath(f"no path from {source} to {target}")


def reverse_distances(graph: Graph, costs, target: int) -> np.ndarray:
    """Per-node shortest distance to ``target``; +inf where unreachable."""
    costs = _check_costs(graph, costs)
    if not 0 <= target < graph.node_count:
        raise ValueError("target out of range")
    mat = _pattern_matrix(graph._reverse_pattern, costs, graph.node_count)
    return np.asarray(_csgraph_dijkstra(mat, directed=True, indices=target))


def forward_distances(graph: Graph, costs, source: int) -> np.ndarray:
    """Per-node shortest distance from ``source``; +inf where unreachable."""
    costs = _check_costs(graph, costs)
    if not 0 <= source < graph.node_count:
        raise ValueError("source out of range")
    mat = _pattern_matrix(graph._forward_pattern, costs, graph.node_count)
    return np.asarray(_csgraph_dijkstra(mat, directed=True, indices=source))


def enumerate_simple_paths(graph: Graph, source: int, target: int,
                           max_paths: int) -> list[Path]:
    """All simple source-target paths in lexicographic arc-index DFS order.

    Raises TooManyPaths as soon as the count would exceed ``max_paths``;
    intended for the brute-force oracle, not production solves.
    """
    if max_paths <= 0:
        raise ValueError("max_paths must be positive")
    if not (0 <= source < graph.node_count and 0 <= target < graph.node_count):
        raise ValueError("source/target out of range")
    found: list[Path] = []
    if source == target:
        found.append(Path((), source, target))
        return found
    on_path = [False] * graph.node_count
    on_path[source] = True
    seq: list[int] = []
    # stack of per-node iterators over outgoing arc positions
    stack: list[tuple[int, int]] = [(source, 0)]
    while stack:
        node, k = stack.pop()
        if k == 0 and node != source:
            pass
        advanced = False
        out = graph.out_arcs[node]
        while k < len(out):
            arc = out[k]
            k += 1
            head = graph.arcs[arc][1]
            if head == target:
                if len(found) >= max_paths:
                    raise TooManyPaths(f"more than {max_paths} simple paths")
                found.append(Path(tuple(seq) + (arc,), source, target))
                continue
            if on_path[head]:
                continue
            stack.append((node, k))
            on_path[head] = True
            seq.append(arc)
            stack.append((head, 0))
            advanced = True
            break
        if not advanced and node != source:
            on_path[node] = False
            seq.pop()
    return found


def save_graph(graph: Graph, path: str | FilePath) -> None:
    payload: dict = {"node_count": graph.node_count,
                     "arcs": [[t, h] for t, h in graph.arcs]}
    if graph.node_coords is not None:
        payload["node_coords"] = [[lon, lat] for lon, lat in graph.node_coords]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_graph(path: str | FilePath) -> Graph:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    coords = payload.get("node_coords")
    if coords is not None:
        coords = [(float(lon), float(lat)) for lon, lat in coords]
    return Graph(int(payload["node_count"]),
                 [(int(t), int(h)) for t, h in payload["arcs"]],
                 node_coords=coords)


def reachable_from(graph: Graph, source: int) -> np.ndarray:
    """Boolean mask of nodes reachable from ``source`` (BFS, costs ignored)."""
    seen = np.zeros(graph.node_count, dtype=bool)
    seen[source] = True
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            for arc in graph.out_arcs[v]:
                h = graph.arcs[arc][1]
                if not seen[h]:
                    seen[h] = True
                    nxt.append(h)
        frontier = nxt
    return seen
