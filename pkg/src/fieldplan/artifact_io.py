"""Layout documents, SVG drawings and Pareto tables.

Layout documents embed the spec they were generated from so that a file can
be re-evaluated on its own; the spec fingerprint guards against edits.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any
from xml.sax.saxutils import escape

import numpy as np

from fieldplan.evolution import (
    OptimizerConfig,
    Phenotype,
    RunArchive,
    express,
    fast_nondominated_sort,
    genome_hash,
)
from fieldplan.field_engine import FREE, OUTSIDE, Allocation, FieldConstants, room_components
from fieldplan.circulation import corridor_metrics
from fieldplan.spec_model import DesignSpec, Grid, build_grid, entrance_candidate_cells, spec_from_dict

FORMAT_VERSION = 1
PX_PER_M = 20

KIND_FILL = {
    "living": "#f6d58e",
    "dining": "#f6d58e",
    "bedroom": "#a9cce3",
    "bathroom": "#a3e4d7",
    "kitchen": "#f5b7b1",
    "study": "#d7bde2",
    "lift": "#bfc9ca",
    "other": "#e5e7e9",
}
CORRIDOR_FILL = "#d5d8dc"


class LayoutError(ValueError):
    pass


@dataclass
class LayoutDocument:
    spec: DesignSpec
    spec_fingerprint: str
    genome: list[float]
    constants: FieldConstants
    shorten_factor: float
    fields: list[dict[str, float]]
    rooms: list[dict[str, Any]]
    corridor_cells: list[int]
    entry: int
    entrances: list[int | None]
    objectives: dict[str, float]
    diagnostics: dict[str, Any]

    @property
    def objective_labels(self) -> list[str]:
        return list(self.spec.objectives)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "spec_fingerprint": self.spec_fingerprint,
            "genome": self.genome,
            "constants": {
                "delta": self.constants.delta,
                "epsilon": self.constants.epsilon,
                "shorten_factor": self.shorten_factor,
            },
            "fields": self.fields,
            "rooms": self.rooms,
            "corridor_cells": self.corridor_cells,
            "entry": self.entry,
            "entrances": self.entrances,
            "objectives": [[k, self.objectives[k]] for k in self.spec.objectives],
            "diagnostics": self.diagnostics,
        }


# -- outlines ------------------------------------------------------------------------


def _loop_area(loop: list[tuple[int, int]]) -> float:
    total = 0
    for (x1, y1), (x2, y2) in zip(loop, loop[1:] + loop[:1]):
        total += x1 * y2 - x2 * y1
    return total / 2


def trace_outline(cells: list[int], columns: int) -> list[list[tuple[int, int]]]:
    """Boundary loops of a cell set in integer lattice coordinates.

    Outer loops run counterclockwise, holes clockwise. Collinear vertices are
    dropped.
    """
    occupied = set(cells)
    out_edges: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for cell in sorted(occupied):
        c, r = cell % columns, cell // columns
        corners = [(c, r), (c + 1, r), (c + 1, r + 1), (c, r + 1)]
        neigh = [(c, r - 1), (c + 1, r), (c, r + 1), (c - 1, r)]
        for k, (nc, nr) in enumerate(neigh):
            inside = 0 <= nc < columns and nr >= 0 and nr * columns + nc in occupied
            if not inside:
                out_edges.setdefault(corners[k], []).append(corners[(k + 1) % 4])

    loops = []
    while out_edges:
        start = min(out_edges)
        loop = [start]
        prev_dir = None
        cur = start
        while True:
            options = out_edges[cur]
            if len(options) == 1 or prev_dir is None:
                nxt = options[0] if len(options) == 1 else min(options)
            else:
                # left turn first keeps pinch vertices from crossing loops
                def turn(p, d=prev_dir, cur=cur):
                    nd = (p[0] - cur[0], p[1] - cur[1])
                    return -(d[0] * nd[1] - d[1] * nd[0])

                nxt = min(options, key=turn)
            options.remove(nxt)
            if not options:
                del out_edges[cur]
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            cur = nxt
            if cur == start:
                break
            loop.append(cur)
        loops.append(_simplify(loop))
    return loops


def _simplify(loop: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out = []
    n = len(loop)
    for i in range(n):
        a, b, c = loop[i - 1], loop[i], loop[(i + 1) % n]
        if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) != 0:
            out.append(b)
    return out


def room_outlines(alloc: Allocation, room: int, grid: Grid) -> list[dict[str, list]]:
    """One polygon (outer loops plus holes) per connected component, in metres."""
    s = grid.cell_size
    ox, oy = grid.origin
    polys = []
    for comp in room_components(alloc, room, grid):
        outer, holes = [], []
        for loop in trace_outline(comp, grid.columns):
            pts = [[ox + x * s, oy + y * s] for x, y in loop]
            (outer if _loop_area(loop) > 0 else holes).append(pts)
        polys.append({"outer": outer, "holes": holes})
    return polys


# -- documents -------------------------------------------------------------------------


def build_document(
    spec: DesignSpec,
    genome: np.ndarray,
    grid: Grid | None = None,
    constants: FieldConstants = FieldConstants(),
    shorten_factor: float = 0.8,
    phenotype: Phenotype | None = None,
) -> LayoutDocument:
    grid = grid if grid is not None else build_grid(spec)
    if phenotype is None:
        phenotype = express(
            genome, spec, grid, entrance_candidate_cells(spec, grid), constants, shorten_factor
        )
    dec, alloc, entrances, pattern, objectives = phenotype
    s = grid.cell_size
    rooms = []
    for i, rs in enumerate(spec.rooms):
        cells = [int(c) for c in alloc.cells(i)]
        rooms.append(
            {
                "name": rs.name,
                "kind": rs.kind,
                "cells": cells,
                "area": len(cells) * s * s,
                "outlines": room_outlines(alloc, i, grid),
            }
        )
    corridor = corridor_metrics(pattern, spec, grid, alloc)
    reachable = pattern.reachable
    return LayoutDocument(
        spec=spec,
        spec_fingerprint=spec.fingerprint(),
        genome=[float(x) for x in genome],
        constants=constants,
        shorten_factor=shorten_factor,
        fields=[
            {"x0": f.x0, "y0": f.y0, "m_x": f.m_x, "m_y": f.m_y, "t": f.t} for f in dec.fields
        ],
        rooms=rooms,
        corridor_cells=sorted(corridor.cells),
        entry=int(dec.entry),
        entrances=[None if e is None else int(e) for e in entrances],
        objectives=objectives.as_dict(),
        diagnostics={
            "connected": [len(room_components(alloc, i, grid)) == 1 for i in range(len(spec.rooms))],
            "unreachable": [i for i, ok in enumerate(reachable) if not ok],
            "corridor_length": corridor.length,
        },
    )


def write_layout(doc: LayoutDocument) -> bytes:
    text = json.dumps(doc.to_dict(), sort_keys=True, indent=1, allow_nan=False)
    return (text + "\n").encode("utf-8")


def read_layout(data: bytes | str) -> LayoutDocument:
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"layout parse failure: {exc}") from exc
    try:
        spec = spec_from_dict(raw["spec"])
        if spec.fingerprint() != raw["spec_fingerprint"]:
            raise LayoutError("spec fingerprint mismatch: layout file was modified")
        consts = raw["constants"]
        return LayoutDocument(
            spec=spec,
            spec_fingerprint=raw["spec_fingerprint"],
            genome=[float(x) for x in raw["genome"]],
            constants=FieldConstants(consts["delta"], consts["epsilon"]),
            shorten_factor=consts["shorten_factor"],
            fields=raw["fields"],
            rooms=raw["rooms"],
            corridor_cells=raw["corridor_cells"],
            entry=raw["entry"],
            entrances=raw["entrances"],
            objectives={k: v for k, v in raw["objectives"]},
            diagnostics=raw["diagnostics"],
        )
    except (KeyError, TypeError) as exc:
        raise LayoutError(f"malformed layout document: {exc!r}") from exc


def reevaluate(doc: LayoutDocument) -> dict[str, float]:
    """Recompute the objective vector from the embedded genome and spec."""
    fresh = build_document(doc.spec, np.array(doc.genome), None, doc.constants, doc.shorten_factor)
    return fresh.objectives


# -- SVG -----------------------------------------------------------------------------------


def _fmt(v: float) -> str:
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def render_svg(doc: LayoutDocument, grid: Grid | None = None) -> str:
    spec = doc.spec
    grid = grid if grid is not None else build_grid(spec)
    minx, miny, maxx, maxy = spec.bounds
    margin = 1.0
    width = (maxx - minx + 2 * margin) * PX_PER_M
    height = (maxy - miny + 2 * margin) * PX_PER_M

    def px(x: float, y: float) -> str:
        return f"{_fmt((x - minx + margin) * PX_PER_M)},{_fmt((maxy - y + margin) * PX_PER_M)}"

    s = grid.cell_size
    owner = np.full(grid.n_cells, OUTSIDE, dtype=np.int64)
    owner[grid.inside_indices()] = FREE
    for i, room in enumerate(doc.rooms):
        owner[room["cells"]] = i
    group_of = {i: i for i in range(len(spec.rooms))}
    for group in spec.open_plan_groups:
        for member in group:
            group_of[member] = min(group)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]

    def cell_rect(cell: int, fill: str, cls: str) -> str:
        col, row = grid.col_row(cell)
        x = grid.origin[0] + col * s
        y = grid.origin[1] + (row + 1) * s
        xy = px(x, y).split(",")
        return (
            f'<rect class="{cls}" x="{xy[0]}" y="{xy[1]}" width="{_fmt(s * PX_PER_M)}" '
            f'height="{_fmt(s * PX_PER_M)}" fill="{fill}"/>'
        )

    out.append('<g id="rooms">')
    for i, room in enumerate(doc.rooms):
        fill = KIND_FILL.get(spec.rooms[group_of[i]].kind, KIND_FILL["other"])
        for poly in room["outlines"]:
            d = ""
            for loop in poly["outer"] + poly["holes"]:
                d += "M" + " L".join(px(x, y) for x, y in loop) + " Z "
            out.append(f'<path class="room" data-room="{i}" d="{d.strip()}" fill="{fill}" fill-rule="evenodd"/>')
    out.append("</g>")

    out.append('<g id="corridor">')
    for cell in doc.corridor_cells:
        out.append(cell_rect(cell, CORRIDOR_FILL, "corridor"))
    out.append("</g>")

    # walls: cell edges between different owners, except inside one open-plan group
    out.append('<g id="walls" stroke="#222222" stroke-width="2" stroke-linecap="square">')
    for cell in range(grid.n_cells):
        a = owner[cell]
        if a < 0:
            continue
        col, row = grid.col_row(cell)
        for dc, dr in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            c, r = col + dc, row + dr
            b = owner[r * grid.columns + c] if 0 <= c < grid.columns and 0 <= r < grid.rows else OUTSIDE
            if a == b:
                continue
            if b >= 0 and (b < a or group_of[a] == group_of[b]):
                continue
            x0 = grid.origin[0] + (col + (dc == 1)) * s
            y0 = grid.origin[1] + (row + (dr == 1)) * s
            if dc:
                x1, y1 = x0, y0 + s
            else:
                x1, y1 = x0 + s, y0
            p0, p1 = px(x0, y0).split(","), px(x1, y1).split(",")
            out.append(f'<line x1="{p0[0]}" y1="{p0[1]}" x2="{p1[0]}" y2="{p1[1]}"/>')
    out.append("</g>")

    env = " ".join(px(x, y) for x, y in spec.envelope)
    out.append(f'<polygon id="envelope" points="{env}" fill="none" stroke="#000000" stroke-width="3"/>')
    out.append('<g id="windows" stroke="#2e86c1" stroke-width="6">')
    for (ax, ay), (bx, by) in spec.windows:
        p0, p1 = px(ax, ay).split(","), px(bx, by).split(",")
        out.append(f'<line x1="{p0[0]}" y1="{p0[1]}" x2="{p1[0]}" y2="{p1[1]}"/>')
    out.append("</g>")

    out.append('<g id="entrances">')
    for cell in doc.entrances:
        if cell is None:
            continue
        cx, cy = px(*_centre(grid, cell)).split(",")
        out.append(f'<circle class="entrance" cx="{cx}" cy="{cy}" r="{_fmt(s * PX_PER_M / 4)}" fill="#c0392b"/>')
    ex, ey = px(*_centre(grid, doc.entry)).split(",")
    out.append(f'<rect class="entry" x="{_fmt(float(ex) - 5)}" y="{_fmt(float(ey) - 5)}" width="10" height="10" fill="#1e8449"/>')
    out.append("</g>")

    out.append('<g id="labels" font-family="sans-serif" font-size="12" text-anchor="middle">')
    for i, room in enumerate(doc.rooms):
        if not room["cells"]:
            continue
        pts = np.array([_centre(grid, c) for c in room["cells"]])
        lx, ly = px(float(pts[:, 0].mean()), float(pts[:, 1].mean())).split(",")
        out.append(f'<text x="{lx}" y="{ly}">{escape(room["name"])}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _centre(grid: Grid, cell: int) -> tuple[float, float]:
    col, row = grid.col_row(cell)
    return grid.origin[0] + (col + 0.5) * grid.cell_size, grid.origin[1] + (row + 0.5) * grid.cell_size


# -- archives and tables ----------------------------------------------------------------------


def archive_to_dict(archive: RunArchive, spec: DesignSpec, config: OptimizerConfig) -> dict[str, Any]:
    """Serializable archive; wall-clock time is left out so reruns stay byte-identical."""
    return {
        "format": FORMAT_VERSION,
        "spec_fingerprint": spec.fingerprint(),
        "labels": list(archive.labels),
        "evaluations": archive.evaluations,
        "seed": config.seed,
        "generations": [
            {
                "generation": g,
                "genomes": [[float(x) for x in row] for row in snap.genomes],
                "objectives": [list(v) for v in snap.objectives],
                "born": list(snap.born),
            }
            for g, snap in enumerate(archive.snapshots)
        ],
        "pareto": [
            {
                "generation": m.generation,
                "genome": [float(x) for x in m.genome],
                "objectives": list(m.objectives),
                "genome_hash": genome_hash(m.genome),
            }
            for m in archive.pareto
        ],
    }


def pareto_rows(archive: RunArchive | dict[str, Any]) -> tuple[list[str], list[dict[str, Any]]]:
    if isinstance(archive, RunArchive):
        labels = list(archive.labels)
        rows = [
            {"generation": m.generation, "objectives": list(m.objectives), "genome_hash": genome_hash(m.genome)}
            for m in archive.pareto
        ]
    else:
        labels = list(archive["labels"])
        rows = [
            {"generation": m["generation"], "objectives": m["objectives"], "genome_hash": m["genome_hash"]}
            for m in archive["pareto"]
        ]
    return labels, rows


def write_pareto_csv(archive: RunArchive | dict[str, Any]) -> str:
    labels, rows = pareto_rows(archive)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["generation", *labels, "genome_hash"])
    for row in rows:
        writer.writerow([row["generation"], *(repr(float(v)) for v in row["objectives"]), row["genome_hash"]])
    return buf.getvalue()


def read_pareto_csv(text: str) -> tuple[list[str], list[tuple[int, tuple[float, ...], str]]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    labels = header[1:-1]
    rows = [(int(r[0]), tuple(float(v) for v in r[1:-1]), r[-1]) for r in reader]
    return labels, rows


def merge_archives(archives: list[dict[str, Any]]) -> dict[str, Any]:
    """Union of several archives' Pareto members, reduced to the non-dominated set."""
    if not archives:
        raise ValueError("nothing to merge")
    labels = archives[0]["labels"]
    if any(a["labels"] != labels for a in archives):
        raise ValueError("archives use different objectives")
    members = [m for a in archives for m in a["pareto"]]
    if not members:
        return {"labels": labels, "pareto": []}
    front = fast_nondominated_sort([m["objectives"] for m in members])[0]
    seen, keep = set(), []
    for i in front:
        key = (tuple(members[i]["objectives"]), members[i]["genome_hash"])
        if key not in seen:
            seen.add(key)
            keep.append(members[i])
    return {"labels": labels, "pareto": keep}


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=1, allow_nan=False) + "\n"
