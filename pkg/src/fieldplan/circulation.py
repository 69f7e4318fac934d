"""Circulation routing over free cells and room boundary cells.

The weighted graph excludes room interiors. Corridors are found with a
Dijkstra variant that, each time it settles a room entrance, discounts the
edges of that entrance's path so later paths tend to reuse it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from fieldplan.field_engine import FREE, Allocation, _differs
from fieldplan.spec_model import DesignSpec, Grid

FREE_FREE = 2.0
FREE_BOUNDARY = 5.0
BOUNDARY_BOUNDARY = 10.0

INF = math.inf


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class PathGraph:
    """Undirected cell graph; ``lengths`` is mutable and shared by both directions."""

    nodes: list[int]
    boundary: frozenset[int]
    adjacency: dict[int, list[int]]
    lengths: dict[tuple[int, int], float]

    def length(self, a: int, b: int) -> float:
        return self.lengths[_edge_key(a, b)]

    def copy(self) -> PathGraph:
        return PathGraph(self.nodes, self.boundary, self.adjacency, dict(self.lengths))

    def __contains__(self, node: int) -> bool:
        return node in self.adjacency


def build_path_graph(alloc: Allocation, grid: Grid) -> PathGraph:
    owner = alloc.owner
    nodes = []
    boundary = set()
    for cell in grid.inside_indices():
        cell = int(cell)
        if owner[cell] == FREE:
            nodes.append(cell)
        elif _differs(alloc, grid, cell):
            nodes.append(cell)
            boundary.add(cell)
    node_set = set(nodes)
    adjacency: dict[int, list[int]] = {n: [] for n in nodes}
    lengths: dict[tuple[int, int], float] = {}
    for n in nodes:
        for m in grid.neighbours(n):
            if m not in node_set:
                continue
            adjacency[n].append(m)
            if n < m:
                kinds = (n in boundary) + (m in boundary)
                lengths[(n, m)] = (FREE_FREE, FREE_BOUNDARY, BOUNDARY_BOUNDARY)[kinds]
    for n in nodes:
        adjacency[n].sort()
    return PathGraph(nodes, frozenset(boundary), adjacency, lengths)


def eligible_entrance_cells(alloc: Allocation, room: int, grid: Grid, graph: PathGraph) -> list[int]:
    """Boundary cells of ``room`` touching a graph node owned by something else."""
    out = []
    for cell in alloc.cells(room):
        cell = int(cell)
        if cell not in graph:
            continue
        if any(n in graph and alloc.owner[n] != room for n in grid.neighbours(cell)):
            out.append(cell)
    return out


def select_entrances(
    fractions: list[float], alloc: Allocation, grid: Grid, graph: PathGraph | None = None
) -> list[int | None]:
    """Pick one entrance per room by floor-mapping a fraction onto its eligible cells.

    Rooms without an eligible cell get ``None``.
    """
    if graph is None:
        graph = build_path_graph(alloc, grid)
    out: list[int | None] = []
    for room, frac in enumerate(fractions):
        cells = eligible_entrance_cells(alloc, room, grid, graph)
        if not cells:
            out.append(None)
            continue
        idx = min(int(math.floor(frac * len(cells))), len(cells) - 1)
        out.append(cells[max(idx, 0)])
    return out


def dijkstra_reference(graph: PathGraph, source: int) -> tuple[dict[int, float], dict[int, int | None]]:
    if source not in graph:
        raise KeyError(f"source {source} is not a graph node")
    dist = {n: INF for n in graph.nodes}
    pred: dict[int, int | None] = {n: None for n in graph.nodes}
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in graph.adjacency[u]:
            nd = d + graph.length(u, v)
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


@dataclass
class CirculationPattern:
    source: int
    entrances: list[int | None]
    paths: dict[int, list[int]] = field(default_factory=dict)
    distances: dict[int, float] = field(default_factory=dict)
    dist: dict[int, float] = field(default_factory=dict)

    @property
    def reachable(self) -> list[bool]:
        return [room in self.paths for room in range(len(self.entrances))]

    def path_cells(self) -> set[int]:
        return {c for p in self.paths.values() for c in p}


def _trace(pred: dict[int, int | None], node: int) -> list[int]:
    path = [node]
    while pred[path[-1]] is not None:
        path.append(pred[path[-1]])
    path.reverse()
    return path


def path_generation(
    graph: PathGraph,
    source: int,
    entrances: list[int | None],
    shorten_factor: float = 0.8,
    prefer_shared: bool = True,
) -> CirculationPattern:
    """Route from ``source`` to every room entrance with path shortening.

    ``entrances`` is indexed by room (``None`` marks an entrance-less room).
    Edge lengths are discounted on a private copy; ``graph`` is not mutated.
    Each settled entrance gets its path recorded and frozen, the edges on it
    are multiplied by ``shorten_factor``, the cumulative distances along it
    are recomputed and those nodes go back onto the frontier.
    """
    if source not in graph:
        raise KeyError(f"source {source} is not a graph node")
    if not 0 < shorten_factor <= 1:
        raise ValueError("shorten_factor must lie in (0, 1]")

    lengths = dict(graph.lengths)
    adjacency = graph.adjacency
    targets: dict[int, list[int]] = {}
    for room, cell in enumerate(entrances):
        if cell is not None and cell in graph:
            targets.setdefault(cell, []).append(room)

    dist = {n: INF for n in graph.nodes}
    pred: dict[int, int | None] = {n: None for n in graph.nodes}
    on_path: set[int] = set()
    dist[source] = 0.0
    heap = [(0.0, source)]
    pattern = CirculationPattern(source, list(entrances))

    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u in targets and targets[u][0] not in pattern.paths:
            path = _trace(pred, u)
            for room in targets[u]:
                pattern.paths[room] = list(path)
                pattern.distances[room] = dist[u]
            for a, b in zip(path, path[1:]):
                key = _edge_key(a, b)
                lengths[key] *= shorten_factor
            on_path.update(path)
            for a, b in zip(path, path[1:]):
                nd = dist[a] + lengths[_edge_key(a, b)]
                if nd < dist[b]:
                    dist[b] = nd
                    heapq.heappush(heap, (nd, b))
            d = dist[u]
        for v in adjacency[u]:
            nd = d + lengths[_edge_key(u, v)]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif prefer_shared and nd == dist[v] and v not in on_path and pred[v] is not None:
                cur = pred[v]
                if (u in on_path, -u) > (cur in on_path, -cur):
                    pred[v] = u

    pattern.dist = dist
    return pattern


@dataclass(frozen=True)
class CorridorMetrics:
    cells: frozenset[int]
    length: float
    penalty_length: float
    area: float


def corridor_metrics(pattern: CirculationPattern, spec: DesignSpec, grid: Grid, alloc: Allocation) -> CorridorMetrics:
    """Corridor area L: distinct free path cells times cell size times path width.

    Every room that has no entrance or whose entrance was not reached adds a
    penalty length of ``2 * N * s``.
    """
    s = grid.cell_size
    cells = frozenset(c for c in pattern.path_cells() if alloc.owner[c] == FREE)
    length = len(cells) * s
    missing = sum(1 for ok in pattern.reachable if not ok)
    penalty = missing * 2 * grid.inside_count * s
    return CorridorMetrics(cells, length, penalty, (length + penalty) * spec.path_width)
