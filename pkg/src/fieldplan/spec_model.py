"""Design specifications and the uniform cell grid they are decomposed into.

Coordinates are metres with y pointing up. Cells are addressed by a flat
row-major index ``row * columns + col``; row 0 is the southernmost row.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Sequence

import numpy as np

Point = tuple[float, float]
Segment = tuple[Point, Point]

OBJECTIVES = ("area_minus_conflict", "circulation", "shadow", "adjacency")
ROOM_KINDS = ("living", "dining", "bedroom", "bathroom", "kitchen", "study", "lift", "other")
HABITABLE_KINDS = frozenset({"living", "dining", "bedroom", "study"})

# face order used throughout: (dcol, drow)
FACES = {"south": (0, -1), "east": (1, 0), "north": (0, 1), "west": (-1, 0)}

_TOL = 1e-9


class SpecError(ValueError):
    """Raised for malformed or inconsistent design specifications.

    ``path`` names the offending field, e.g. ``rooms[2].width``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class RoomSpec:
    name: str
    kind: str
    width_range: tuple[float, float]
    height_range: tuple[float, float]
    habitable: bool = False


@dataclass(frozen=True)
class DesignSpec:
    envelope: tuple[Point, ...]
    rooms: tuple[RoomSpec, ...]
    entrance_candidates: tuple[Point, ...]
    cell_size: float = 1.0
    windows: tuple[Segment, ...] = ()
    adjacency_pairs: tuple[tuple[int, int], ...] = ()
    open_plan_groups: tuple[tuple[int, ...], ...] = ()
    objectives: tuple[str, ...] = ("area_minus_conflict", "circulation")
    light_directions: tuple[Point, ...] = ()
    path_width: float = 1.0

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.envelope]
        ys = [p[1] for p in self.envelope]
        return min(xs), min(ys), max(xs), max(ys)

    def edges(self) -> list[Segment]:
        pts = self.envelope
        return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready form, the inverse of :func:`spec_from_dict`."""
        return {
            "envelope": [list(p) for p in self.envelope],
            "windows": [{"edge": [list(a), list(b)]} for a, b in self.windows],
            "entrances": [list(p) for p in self.entrance_candidates],
            "rooms": [
                {
                    "name": r.name,
                    "kind": r.kind,
                    "habitable": r.habitable,
                    "width": list(r.width_range),
                    "height": list(r.height_range),
                }
                for r in self.rooms
            ],
            "adjacency": [list(p) for p in self.adjacency_pairs],
            "open_plan": [list(g) for g in self.open_plan_groups],
            "cell_size": self.cell_size,
            "objectives": list(self.objectives),
            "light_directions": [list(d) for d in self.light_directions],
            "path_width": self.path_width,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform decomposition of the envelope interior.

    ``inside_mask`` has shape ``(rows, columns)``. ``boundary_edge_map`` maps
    ``(cell, face)`` for every inside cell whose neighbour across ``face`` is
    not inside, to ``(edge index or None, is_window)``; the edge index is
    ``None`` when the face does not lie on an envelope edge.
    """

    origin: Point
    cell_size: float
    columns: int
    rows: int
    inside_mask: np.ndarray
    boundary_edge_map: dict[tuple[int, str], tuple[int | None, bool]] = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.rows * self.columns

    @property
    def inside_count(self) -> int:
        return int(self.inside_mask.sum())

    @property
    def inside_flat(self) -> np.ndarray:
        return self.inside_mask.ravel()

    def inside_indices(self) -> np.ndarray:
        return np.flatnonzero(self.inside_flat)

    def col_row(self, index: int) -> tuple[int, int]:
        return index % self.columns, index // self.columns

    def index_of(self, col: int, row: int) -> int:
        return row * self.columns + col

    def is_inside(self, col: int, row: int) -> bool:
        return 0 <= col < self.columns and 0 <= row < self.rows and bool(self.inside_mask[row, col])

    def neighbours(self, index: int) -> list[int]:
        """Inside 4-neighbours of a cell, in south/east/north/west order."""
        col, row = self.col_row(index)
        out = []
        for dc, dr in FACES.values():
            c, r = col + dc, row + dr
            if self.is_inside(c, r):
                out.append(r * self.columns + c)
        return out

    def centers(self) -> np.ndarray:
        """Centres of all cells, shape ``(rows * columns, 2)``."""
        cols, rows = np.meshgrid(np.arange(self.columns), np.arange(self.rows))
        xs = self.origin[0] + (cols.ravel() + 0.5) * self.cell_size
        ys = self.origin[1] + (rows.ravel() + 0.5) * self.cell_size
        return np.column_stack([xs, ys])

    def cell_of_point(self, x: float, y: float) -> tuple[int, int]:
        return (
            math.floor((x - self.origin[0]) / self.cell_size),
            math.floor((y - self.origin[1]) / self.cell_size),
        )


# -- geometry helpers ---------------------------------------------------------


def point_on_segment(p: Point, seg: Segment, tol: float = _TOL) -> bool:
    (ax, ay), (bx, by) = seg
    px, py = p
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > tol * max(1.0, math.hypot(bx - ax, by - ay)):
        return False
    return (
        min(ax, bx) - tol <= px <= max(ax, bx) + tol
        and min(ay, by) - tol <= py <= max(ay, by) + tol
    )


def points_in_polygon(points: np.ndarray, vertices: Sequence[Point]) -> np.ndarray:
    """Strict containment test for many points; boundary points are outside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < x_at)
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        on_edge |= (
            (np.abs(cross) <= _TOL * max(1.0, math.hypot(bx - ax, by - ay)))
            & (px >= min(ax, bx) - _TOL)
            & (px <= max(ax, bx) + _TOL)
            & (py >= min(ay, by) - _TOL)
            & (py <= max(ay, by) + _TOL)
        )
    return inside & ~on_edge


def _segments_cross(s1: Segment, s2: Segment) -> bool:
    """Proper or touching intersection between two axis-aligned segments."""
    (a, b), (c, d) = s1, s2
    if max(a[0], b[0]) < min(c[0], d[0]) - _TOL or max(c[0], d[0]) < min(a[0], b[0]) - _TOL:
        return False
    if max(a[1], b[1]) < min(c[1], d[1]) - _TOL or max(c[1], d[1]) < min(a[1], b[1]) - _TOL:
        return False
    return True


def _signed_area(vertices: Sequence[Point]) -> float:
    total = 0.0
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


# -- loading and validation ---------------------------------------------------


def _pair(value: Any, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SpecError("expected a pair of numbers", path)
    try:
        a, b = float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise SpecError("expected a pair of numbers", path) from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise SpecError("non-finite value", path)
    return a, b


def spec_from_dict(data: dict[str, Any]) -> DesignSpec:
    """Build and validate a :class:`DesignSpec` from its JSON form."""
    if not isinstance(data, dict):
        raise SpecError("top level must be an object")
    for key in ("envelope", "rooms", "entrances"):
        if key not in data:
            raise SpecError("missing required key", key)

    envelope = tuple(_pair(p, f"envelope[{i}]") for i, p in enumerate(data["envelope"]))

    rooms = []
    for i, r in enumerate(data["rooms"]):
        path = f"rooms[{i}]"
        if not isinstance(r, dict):
            raise SpecError("expected an object", path)
        kind = r.get("kind", "other")
        if kind not in ROOM_KINDS:
            raise SpecError(f"unknown room kind {kind!r}", f"{path}.kind")
        for key in ("width", "height"):
            if key not in r:
                raise SpecError("missing dimension range", f"{path}.{key}")
        rooms.append(
            RoomSpec(
                name=str(r.get("name", f"room{i}")),
                kind=kind,
                width_range=_pair(r["width"], f"{path}.width"),
                height_range=_pair(r["height"], f"{path}.height"),
                habitable=bool(r.get("habitable", kind in HABITABLE_KINDS)),
            )
        )

    if data.get("all_walls_windows", False):
        pts = envelope
        windows = tuple((pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts)))
    else:
        windows = []
        for i, w in enumerate(data.get("windows", [])):
            edge = w.get("edge") if isinstance(w, dict) else w
            if not isinstance(edge, (list, tuple)) or len(edge) != 2:
                raise SpecError("expected {edge: [p0, p1]}", f"windows[{i}]")
            windows.append(
                (_pair(edge[0], f"windows[{i}].edge[0]"), _pair(edge[1], f"windows[{i}].edge[1]"))
            )
        windows = tuple(windows)

    def _index_list(value: Any, path: str) -> tuple[int, ...]:
        if not isinstance(value, (list, tuple)):
            raise SpecError("expected a list of room indices", path)
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, int):
                raise SpecError("room index must be an integer", path)
            out.append(v)
        return tuple(out)

    adjacency = []
    for i, p in enumerate(data.get("adjacency", [])):
        pair = _index_list(p, f"adjacency[{i}]")
        if len(pair) != 2:
            raise SpecError("expected a pair of room indices", f"adjacency[{i}]")
        adjacency.append((pair[0], pair[1]))

    objectives = data.get("objectives", ["area_minus_conflict", "circulation"])
    if not isinstance(objectives, (list, tuple)):
        raise SpecError("expected a list of objective names", "objectives")

    try:
        cell_size = float(data.get("cell_size", 1.0))
        path_width = float(data.get("path_width", 1.0))
    except (TypeError, ValueError):
        raise SpecError("expected a number", "cell_size/path_width") from None

    spec = DesignSpec(
        envelope=envelope,
        rooms=tuple(rooms),
        entrance_candidates=tuple(
            _pair(p, f"entrances[{i}]") for i, p in enumerate(data["entrances"])
        ),
        cell_size=cell_size,
        windows=windows,
        adjacency_pairs=tuple(adjacency),
        open_plan_groups=tuple(
            _index_list(g, f"open_plan[{i}]") for i, g in enumerate(data.get("open_plan", []))
        ),
        objectives=tuple(str(o) for o in objectives),
        light_directions=tuple(
            _pair(d, f"light_directions[{i}]") for i, d in enumerate(data.get("light_directions", []))
        ),
        path_width=path_width,
    )
    validate_spec(spec)
    return _normalise_lights(spec)


def _normalise_lights(spec: DesignSpec) -> DesignSpec:
    lights = []
    for dx, dy in spec.light_directions:
        norm = math.hypot(dx, dy)
        lights.append((dx / norm, dy / norm))
    return DesignSpec(**{**spec.__dict__, "light_directions": tuple(lights)})


def validate_spec(spec: DesignSpec) -> None:
    """Check every structural invariant; raise :class:`SpecError` on the first failure."""
    env = spec.envelope
    if len(env) < 4:
        raise SpecError("envelope needs at least 4 vertices", "envelope")
    edges = spec.edges()
    for i, (a, b) in enumerate(edges):
        if a == b:
            raise SpecError("zero-length edge", f"envelope[{i}]")
        if abs(a[0] - b[0]) > _TOL and abs(a[1] - b[1]) > _TOL:
            raise SpecError("edges must be axis-aligned", f"envelope[{i}]")
    n = len(edges)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(edges[i], edges[j]):
                raise SpecError("envelope is self-intersecting", f"envelope[{i}]")
    if _signed_area(env) <= 0:
        raise SpecError("envelope must be counterclockwise", "envelope")

    if not spec.cell_size > 0:
        raise SpecError("must be positive", "cell_size")
    if not spec.path_width > 0:
        raise SpecError("must be positive", "path_width")

    if not spec.rooms:
        raise SpecError("at least one room required", "rooms")
    for i, room in enumerate(spec.rooms):
        if room.kind not in ROOM_KINDS:
            raise SpecError(f"unknown room kind {room.kind!r}", f"rooms[{i}].kind")
        for key, (lo, hi) in (("width", room.width_range), ("height", room.height_range)):
            path = f"rooms[{i}].{key}"
            if lo > hi:
                raise SpecError("range lo > hi", path)
            if not lo > 0:
                raise SpecError("range lo must be positive", path)
            if hi - lo < spec.cell_size - _TOL:
                raise SpecError("range must span at least one cell_size", path)

    for i, (a, b) in enumerate(spec.windows):
        if not any(point_on_segment(a, e) and point_on_segment(b, e) for e in edges):
            raise SpecError("window segment is not on an envelope edge", f"windows[{i}]")

    if not spec.entrance_candidates:
        raise SpecError("at least one entrance candidate required", "entrances")
    for i, p in enumerate(spec.entrance_candidates):
        if not any(point_on_segment(p, e) for e in edges):
            raise SpecError("entrance candidate is not on the envelope boundary", f"entrances[{i}]")

    k = len(spec.rooms)
    for i, (a, b) in enumerate(spec.adjacency_pairs):
        if not (0 <= a < k and 0 <= b < k) or a == b:
            raise SpecError("invalid room index", f"adjacency[{i}]")
    for i, group in enumerate(spec.open_plan_groups):
        if any(not 0 <= g < k for g in group):
            raise SpecError("invalid room index", f"open_plan[{i}]")

    if not spec.objectives:
        raise SpecError("at least one objective required", "objectives")
    for o in spec.objectives:
        if o not in OBJECTIVES:
            raise SpecError(f"unknown objective {o!r}", "objectives")
    if len(set(spec.objectives)) != len(spec.objectives):
        raise SpecError("duplicate objective", "objectives")
    for i, (dx, dy) in enumerate(spec.light_directions):
        if math.hypot(dx, dy) < _TOL:
            raise SpecError("zero-length light direction", f"light_directions[{i}]")
    if "shadow" in spec.objectives and not spec.light_directions:
        raise SpecError("shadow objective needs light_directions", "light_directions")


def load_spec(source: IO[bytes] | IO[str] | bytes | str) -> DesignSpec:
    """Parse a JSON design specification from a stream, bytes or text."""
    if hasattr(source, "read"):
        source = source.read()
    try:
        data = json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SpecError(f"parse failure: {exc}") from exc
    return spec_from_dict(data)


# -- grid ---------------------------------------------------------------------


def build_grid(spec: DesignSpec) -> Grid:
    s = spec.cell_size
    minx, miny, maxx, maxy = spec.bounds
    columns = max(1, math.ceil((maxx - minx) / s - _TOL))
    rows = max(1, math.ceil((maxy - miny) / s - _TOL))
    origin = (minx, miny)

    cols, rws = np.meshgrid(np.arange(columns), np.arange(rows))
    centres = np.column_stack(
        [minx + (cols.ravel() + 0.5) * s, miny + (rws.ravel() + 0.5) * s]
    )
    mask = points_in_polygon(centres, spec.envelope).reshape(rows, columns)
    if not mask.any():
        raise SpecError(f"envelope too small for a single cell at cell_size={s}", "cell_size")

    edges = spec.edges()
    edge_map: dict[tuple[int, str], tuple[int | None, bool]] = {}
    for row, col in zip(*np.nonzero(mask)):
        cx = minx + (col + 0.5) * s
        cy = miny + (row + 0.5) * s
        for face, (dc, dr) in FACES.items():
            c, r = col + dc, row + dr
            if 0 <= c < columns and 0 <= r < rows and mask[r, c]:
                continue
            mid = (cx + dc * s / 2, cy + dr * s / 2)
            hit = next((i for i, e in enumerate(edges) if point_on_segment(mid, e)), None)
            window = hit is not None and any(point_on_segment(mid, w) for w in spec.windows)
            edge_map[(int(row * columns + col), face)] = (hit, window)

    mask.setflags(write=False)
    return Grid(origin, s, columns, rows, mask, edge_map)


def cell_center(grid: Grid, index: int | tuple[int, int]) -> Point:
    """Centre of a cell given a flat index or a ``(col, row)`` pair."""
    if isinstance(index, tuple):
        col, row = index
        if not (0 <= col < grid.columns and 0 <= row < grid.rows):
            raise IndexError(f"cell {index} outside {grid.columns}x{grid.rows} grid")
    else:
        if not 0 <= index < grid.n_cells:
            raise IndexError(f"cell {index} outside grid of {grid.n_cells} cells")
        col, row = grid.col_row(index)
    s = grid.cell_size
    return grid.origin[0] + (col + 0.5) * s, grid.origin[1] + (row + 0.5) * s


def perimeter_cells(grid: Grid) -> list[int]:
    """Inside cells with at least one 4-neighbour that is not inside."""
    return sorted({cell for cell, _ in grid.boundary_edge_map})


def entrance_candidate_cells(spec: DesignSpec, grid: Grid) -> list[int]:
    """Snap each entrance point to the nearest perimeter cell; row-major order."""
    perim = perimeter_cells(grid)
    s = grid.cell_size
    chosen = set()
    for i, (px, py) in enumerate(spec.entrance_candidates):
        best, best_d = None, math.inf
        for cell in perim:
            col, row = grid.col_row(cell)
            x0 = grid.origin[0] + col * s
            y0 = grid.origin[1] + row * s
            dx = max(x0 - px, 0.0, px - (x0 + s))
            dy = max(y0 - py, 0.0, py - (y0 + s))
            d = math.hypot(dx, dy)
            if d < best_d - _TOL:
                best, best_d = cell, d
        if best is None or best_d > s + _TOL:
            raise SpecError("entrance candidate maps to no inside cell", f"entrances[{i}]")
        chosen.add(best)
    return sorted(chosen)
