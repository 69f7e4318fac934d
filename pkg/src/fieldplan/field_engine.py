"""Virtual field magnitudes and competitive cell allocation.

Each room emits a rectangular field from its mass centre. A cell goes to the
room whose field is strongest there, provided that field strictly exceeds the
activation threshold; otherwise the cell stays free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fieldplan.spec_model import FACES, Grid, Point

FREE = -1
OUTSIDE = -2

UPRIGHT = math.pi / 4


@dataclass(frozen=True)
class FieldParams:
    x0: float
    y0: float
    m_x: float
    m_y: float
    t: float = UPRIGHT
    shape: str = "rectangular"

    def __post_init__(self):
        if not (self.m_x > 0 and self.m_y > 0):
            raise ValueError(f"mass parameters must be positive, got {self.m_x}, {self.m_y}")
        if self.shape != "rectangular":
            raise NotImplementedError(f"field shape {self.shape!r} is not implemented")

    @property
    def target_area(self) -> float:
        return self.m_x * self.m_y


@dataclass(frozen=True)
class FieldConstants:
    delta: float = math.sqrt(2.0)
    epsilon: float = 1e-9

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.epsilon < self.delta:
            raise ValueError("epsilon must lie in (0, delta)")


def field_magnitudes(fp: FieldParams, xs: np.ndarray, ys: np.ndarray, epsilon: float) -> np.ndarray:
    dx = np.asarray(xs, dtype=float) - fp.x0
    dy = np.asarray(ys, dtype=float) - fp.y0
    c, s = math.cos(fp.t), math.sin(fp.t)
    # rotated offsets x'-x0, y'-y0; note m_y scales dx and m_x scales dy
    rx = fp.m_y * dx * c - fp.m_x * dy * s
    ry = fp.m_y * dx * s + fp.m_x * dy * c
    return (fp.m_x * fp.m_y) / (np.abs(rx) + np.abs(ry) + epsilon)


def field_magnitude(fp: FieldParams, p: Point, consts: FieldConstants = FieldConstants()) -> float:
    return float(field_magnitudes(fp, np.array([p[0]]), np.array([p[1]]), consts.epsilon)[0])


def active_extent(fp: FieldParams, consts: FieldConstants = FieldConstants()) -> tuple[float, float]:
    """Half-extents of the open rectangle where an upright field exceeds delta.

    At t = pi/4 the field reduces to ``m_x*m_y / (sqrt2*max(m_y|dx|, m_x|dy|) + eps)``,
    so the active set is ``|dx| < h_x and |dy| < h_y``.
    """
    if not math.isclose(fp.t, UPRIGHT, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError("active_extent is only defined for upright fields (t = pi/4)")
    reach = fp.m_x * fp.m_y / consts.delta - consts.epsilon
    root2 = math.sqrt(2.0)
    return reach / (root2 * fp.m_y), reach / (root2 * fp.m_x)


@dataclass(frozen=True, eq=False)
class Allocation:
    """Cell ownership over the full grid.

    ``owner`` is a flat row-major array: a room index, ``FREE`` for unclaimed
    inside cells or ``OUTSIDE`` for cells outside the envelope.
    """

    owner: np.ndarray
    n_rooms: int
    cell_size: float

    @cached_property
    def room_cells(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(self.owner == i) for i in range(self.n_rooms))

    def cells(self, room: int) -> np.ndarray:
        return self.room_cells[room]

    def counts(self) -> np.ndarray:
        return np.bincount(self.owner[self.owner >= 0], minlength=self.n_rooms)

    def areas(self) -> np.ndarray:
        return self.counts() * self.cell_size**2

    def free_cells(self) -> np.ndarray:
        return np.flatnonzero(self.owner == FREE)


def allocate_cells(
    grid: Grid, fields: list[FieldParams], consts: FieldConstants = FieldConstants()
) -> Allocation:
    if not fields:
        raise ValueError("at least one field is required")
    inside = grid.inside_indices()
    centres = grid.centers()[inside]
    strength = np.empty((len(fields), len(inside)))
    for i, fp in enumerate(fields):
        strength[i] = field_magnitudes(fp, centres[:, 0], centres[:, 1], consts.epsilon)
    # argmax returns the first maximum, so ties go to the lowest room index
    best = np.argmax(strength, axis=0)
    top = strength[best, np.arange(len(inside))]
    owner = np.full(grid.n_cells, OUTSIDE, dtype=np.int64)
    owner[inside] = np.where(top > consts.delta, best, FREE)
    owner.setflags(write=False)
    return Allocation(owner, len(fields), grid.cell_size)


def _differs(alloc: Allocation, grid: Grid, index: int) -> bool:
    """True if any 4-neighbour of ``index`` is off-grid or owned differently."""
    col, row = grid.col_row(index)
    mine = alloc.owner[index]
    for dc, dr in FACES.values():
        c, r = col + dc, row + dr
        if not (0 <= c < grid.columns and 0 <= r < grid.rows):
            return True
        if alloc.owner[r * grid.columns + c] != mine:
            return True
    return False


def room_boundary_cells(alloc: Allocation, room: int, grid: Grid) -> list[int]:
    return [int(c) for c in alloc.cells(room) if _differs(alloc, grid, int(c))]


def room_components(alloc: Allocation, room: int, grid: Grid) -> list[list[int]]:
    """4-connected components of a room's cells, each sorted, ordered by first cell."""
    cells = set(int(c) for c in alloc.cells(room))
    comps = []
    for start in sorted(cells):
        if start not in cells:
            continue
        stack, comp = [start], []
        cells.discard(start)
        while stack:
            c = stack.pop()
            comp.append(c)
            for n in grid.neighbours(c):
                if n in cells:
                    cells.discard(n)
                    stack.append(n)
        comps.append(sorted(comp))
    return comps
