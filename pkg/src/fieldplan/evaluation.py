"""Objective functions for a decoded layout.

All objectives are minimised. ``area_minus_conflict`` is reported as
``-(A - C)`` so that larger usable area with less conflict scores lower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fieldplan.circulation import CirculationPattern, corridor_metrics
from fieldplan.field_engine import FREE, Allocation, FieldParams
from fieldplan.spec_model import FACES, DesignSpec, Grid, Point, Segment, point_on_segment, points_in_polygon


@dataclass(frozen=True)
class ObjectiveVector:
    labels: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.values):
            raise ValueError("labels and values differ in length")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"objective values must be finite: {self.values}")

    def __getitem__(self, label: str) -> float:
        return self.values[self.labels.index(label)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values))


def internal_area(alloc: Allocation, s: float) -> float:
    return float(sum(len(c) for c in alloc.room_cells)) * s * s


def conflict_area(fields: list[FieldParams], alloc: Allocation, s: float) -> float:
    """C = sum over rooms of (m_x * m_y - a_i)^2 with a_i in square metres."""
    if len(fields) != alloc.n_rooms:
        raise ValueError("one FieldParams per room required")
    total = 0.0
    for fp, cells in zip(fields, alloc.room_cells):
        total += (fp.m_x * fp.m_y - len(cells) * s * s) ** 2
    return total


def _exit_point(prev: Point, cur: Point, edges: list[Segment]) -> Point | None:
    """First crossing of the step prev->cur with the envelope boundary."""
    (px, py), (cx, cy) = prev, cur
    best, best_t = None, math.inf
    for (ax, ay), (bx, by) in edges:
        rx, ry = cx - px, cy - py
        sx, sy = bx - ax, by - ay
        denom = rx * sy - ry * sx
        if abs(denom) < 1e-15:
            if point_on_segment(cur, ((ax, ay), (bx, by))):
                t = 1.0
                if t < best_t:
                    best, best_t = cur, t
            continue
        t = ((ax - px) * sy - (ay - py) * sx) / denom
        u = ((ax - px) * ry - (ay - py) * rx) / denom
        if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12 and t < best_t:
            best, best_t = (px + t * rx, py + t * ry), t
    return best


def lit_cells(alloc: Allocation, grid: Grid, spec: DesignSpec, room: int, light: Point) -> np.ndarray:
    """Boolean per cell of ``room``: whether a ray towards the light escapes through a window.

    Rays march from the cell centre against ``light`` in steps of half a cell.
    Stepping onto a cell owned by anything other than ``room`` blocks the ray;
    envelope slivers that are not grid cells are transparent.
    """
    lx, ly = light
    norm = math.hypot(lx, ly)
    if norm < 1e-12:
        raise ValueError("zero-length light vector")
    step = grid.cell_size / 2
    sx, sy = -lx / norm * step, -ly / norm * step
    cells = alloc.cells(room)
    if len(cells) == 0:
        return np.zeros(0, dtype=bool)
    centres = grid.centers()[cells]
    edges = spec.edges()

    lit = np.zeros(len(cells), dtype=bool)
    active = np.ones(len(cells), dtype=bool)
    pos = centres.copy()
    owner = alloc.owner
    max_steps = int(math.ceil(2 * (grid.columns + grid.rows) + 4))
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        prev = pos[idx].copy()
        pos[idx, 0] += sx
        pos[idx, 1] += sy
        cur = pos[idx]
        inside = points_in_polygon(cur, spec.envelope)
        for k in np.flatnonzero(~inside):
            ray = idx[k]
            active[ray] = False
            hit = _exit_point(tuple(prev[k]), tuple(cur[k]), edges)
            if hit is not None and any(point_on_segment(hit, w) for w in spec.windows):
                lit[ray] = True
        still = idx[inside]
        if len(still) == 0:
            continue
        col = np.floor((pos[still, 0] - grid.origin[0]) / grid.cell_size).astype(int)
        row = np.floor((pos[still, 1] - grid.origin[1]) / grid.cell_size).astype(int)
        on_grid = (col >= 0) & (col < grid.columns) & (row >= 0) & (row < grid.rows)
        flat = np.where(on_grid, row * grid.columns + col, 0)
        cell_owner = np.where(on_grid, owner[flat], -2)
        # -2 is OUTSIDE: a sliver inside the envelope but not a grid cell
        blocked = (cell_owner != room) & (cell_owner != -2)
        active[still[blocked]] = False
    return lit


def shadow_area(
    alloc: Allocation, grid: Grid, spec: DesignSpec, light: Point | list[Point] | None = None
) -> float:
    """Unlit habitable area, summed over light directions."""
    if light is None:
        lights = list(spec.light_directions)
    elif isinstance(light[0], (int, float)):
        lights = [light]
    else:
        lights = list(light)
    s2 = grid.cell_size**2
    total = 0.0
    for direction in lights:
        for room, rs in enumerate(spec.rooms):
            if not rs.habitable:
                continue
            lit = lit_cells(alloc, grid, spec, room, direction)
            total += float((~lit).sum()) * s2
    return total


def rooms_adjacent(alloc: Allocation, grid: Grid, a: int, b: int) -> bool:
    owner = alloc.owner
    for cell in alloc.cells(a):
        col, row = grid.col_row(int(cell))
        for dc, dr in FACES.values():
            c, r = col + dc, row + dr
            if 0 <= c < grid.columns and 0 <= r < grid.rows and owner[r * grid.columns + c] == b:
                return True
    return False


def adjacency_distance(
    alloc: Allocation, fields: list[FieldParams], pairs, s: float, grid: Grid
) -> float:
    """Zero for each pair sharing a cell edge, else the distance between mass centres."""
    total = 0.0
    for a, b in pairs:
        if rooms_adjacent(alloc, grid, a, b):
            continue
        total += math.hypot(fields[a].x0 - fields[b].x0, fields[a].y0 - fields[b].y0)
    return total


def evaluate_layout(
    spec: DesignSpec,
    grid: Grid,
    fields: list[FieldParams],
    alloc: Allocation,
    pattern: CirculationPattern,
) -> ObjectiveVector:
    s = grid.cell_size
    values = []
    for name in spec.objectives:
        if name == "area_minus_conflict":
            values.append(-(internal_area(alloc, s) - conflict_area(fields, alloc, s)))
        elif name == "circulation":
            values.append(corridor_metrics(pattern, spec, grid, alloc).area)
        elif name == "shadow":
            values.append(shadow_area(alloc, grid, spec))
        elif name == "adjacency":
            values.append(adjacency_distance(alloc, fields, spec.adjacency_pairs, s, grid))
        else:
            raise ValueError(f"unknown objective {name!r}")
    return ObjectiveVector(tuple(spec.objectives), tuple(values))


def free_area(alloc: Allocation, s: float) -> float:
    return float((alloc.owner == FREE).sum()) * s * s
