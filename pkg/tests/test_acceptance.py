"""Acceptance gate: one group of tests per criterion, reported as PASS/FAIL lines."""

import itertools
import time
from importlib.resources import files

import numpy as np
import pytest

from fieldplan.circulation import build_path_graph, corridor_metrics, dijkstra_reference, path_generation
from fieldplan.cli import main
from fieldplan.evaluation import adjacency_distance, conflict_area, internal_area, shadow_area
from fieldplan.evolution import (
    OptimizerConfig,
    crowding_distance,
    dominates,
    evolve,
    express,
    fast_nondominated_sort,
    genome_length,
)
from fieldplan.field_engine import FREE, Allocation, FieldConstants, FieldParams, active_extent, allocate_cells
from fieldplan.spec_model import build_grid, entrance_candidate_cells, spec_from_dict

from conftest import allocation_from_rows, bundled, rect_spec, rect_spec_dict

INF = float("inf")
DESK_SEED = 60


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# -- 1 ------------------------------------------------------------------------------------------


@criterion(1, "allocation equals the closed-form extent rectangle on 200 random fields")
def test_c1_field_oracle():
    grid = build_grid(rect_spec(40, 40))
    consts = FieldConstants()
    centres = grid.centers()
    inside = grid.inside_indices()
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    for _ in range(200):
        fp = FieldParams(*rng.uniform(0, 40, 2), *rng.uniform(2, 8, 2))
        got = set(allocate_cells(grid, [fp], consts).cells(0).tolist())
        hx, hy = active_extent(fp, consts)
        expected = {
            int(i) for i in inside
            if abs(centres[i, 0] - fp.x0) < hx and abs(centres[i, 1] - fp.y0) < hy
        }
        assert got == expected
    assert time.perf_counter() - started < 5.0


# -- 2 ------------------------------------------------------------------------------------------


@criterion(2, "4x3 field footprint: 12 cells on a grid vertex, 9 on a cell centre")
def test_c2_footprint_vertex_centre():
    grid = build_grid(rect_spec(20, 20))
    alloc = allocate_cells(grid, [FieldParams(10.0, 10.0, 4.0, 3.0)])
    assert len(alloc.cells(0)) == 12


@criterion(2, "4x3 field footprint: 12 cells on a grid vertex, 9 on a cell centre")
def test_c2_footprint_cell_centre():
    grid = build_grid(rect_spec(20, 20))
    alloc = allocate_cells(grid, [FieldParams(10.5, 10.5, 4.0, 3.0)])
    assert len(alloc.cells(0)) == 9


# -- 3 ------------------------------------------------------------------------------------------


def random_instance(rng):
    w, h = (int(v) for v in rng.integers(3, 16, size=2))
    grid = build_grid(rect_spec(w, h))
    owner = np.full(grid.n_cells, FREE, dtype=np.int64)
    k = int(rng.integers(0, 5))
    for room in range(k):
        c0, r0 = int(rng.integers(0, w)), int(rng.integers(0, h))
        c1, r1 = min(w, c0 + int(rng.integers(1, 6))), min(h, r0 + int(rng.integers(1, 6)))
        for r in range(r0, r1):
            owner[r * w + c0 : r * w + c1] = room
    return grid, Allocation(owner, max(k, 1), 1.0)


@criterion(3, "shorten factor 1.0 without tie preference equals reference Dijkstra")
def test_c3_degeneracy():
    rng = np.random.default_rng(3)
    for _ in range(100):
        grid, alloc = random_instance(rng)
        graph = build_path_graph(alloc, grid)
        source = graph.nodes[int(rng.integers(len(graph.nodes)))]
        entrances = [graph.nodes[int(i)] for i in rng.integers(0, len(graph.nodes), 4)]
        ref, _ = dijkstra_reference(graph, source)
        pattern = path_generation(graph, source, entrances, shorten_factor=1.0, prefer_shared=False)
        assert pattern.dist == ref


# -- 4 ------------------------------------------------------------------------------------------


def shortest_path_family(graph, source, target, dist):
    if target == source:
        return [[source]]
    out = []
    for p in graph.adjacency[target]:
        if dist[p] + graph.length(p, target) == dist[target]:
            out.extend(path + [target] for path in shortest_path_family(graph, source, p, dist))
    return out


@criterion(4, "path shortening beats the worst reference tie-break on the 7x7 instance")
def test_c4_consolidation():
    spec = rect_spec(7, 7)
    grid = build_grid(spec)
    alloc = Allocation(np.full(grid.n_cells, FREE, dtype=np.int64), 2, 1.0)
    graph = build_path_graph(alloc, grid)
    source = grid.index_of(0, 0)
    entrances = [grid.index_of(4, 2), grid.index_of(2, 4)]

    ref, _ = dijkstra_reference(graph, source)
    families = [shortest_path_family(graph, source, e, ref) for e in entrances]
    assert [len(f) for f in families] == [15, 15]
    unions = [len({c for p in combo for c in p}) for combo in itertools.product(*families)]
    worst = max(unions)

    pattern = path_generation(graph, source, entrances, shorten_factor=0.8)
    count = len(corridor_metrics(pattern, spec, grid, alloc).cells)
    assert count < worst
    for room, e in enumerate(entrances):
        assert pattern.distances[room] <= ref[e]


# -- 5 ------------------------------------------------------------------------------------------


@criterion(5, "A, C and D reproduce hand computations")
def test_c5_objective_formulas():
    owner = np.array([0] * 12 + [1] * 9 + [FREE] * 3)
    assert internal_area(Allocation(owner, 2, 1.0), 1.0) == 21.0

    ten = Allocation(np.array([0] * 10 + [FREE] * 2), 1, 1.0)
    assert conflict_area([FieldParams(0, 0, 4.0, 3.0)], ten, 1.0) == 4.0

    grid, alloc = allocation_from_rows(["0..1"])
    fields = [FieldParams(0, 0, 1, 1), FieldParams(3, 4, 1, 1)]
    assert adjacency_distance(alloc, fields, [(0, 1)], 1.0, grid) == 5.0


# -- 6 ------------------------------------------------------------------------------------------


@criterion(6, "shadow model: south light beats north, south room unshaded, window removal raises S")
def test_c6_shadow():
    rooms = [
        {"name": "Living", "kind": "living", "width": [2, 6], "height": [2, 6]},
        {"name": "Bed", "kind": "bedroom", "width": [2, 6], "height": [2, 6]},
        {"name": "Study", "kind": "study", "width": [2, 6], "height": [2, 6]},
    ]
    base = rect_spec_dict(6, 5, rooms=rooms, objectives=["shadow"], light_directions=[[0, 1]])
    spec = spec_from_dict({**base, "windows": [{"edge": [[0, 0], [6, 0]]}]})
    bare = spec_from_dict({**base, "windows": []})
    grid, alloc = allocation_from_rows([
        "11.222",
        "11.222",
        "11.222",
        "000000",
        "000000",
    ])
    from_south, from_north = (0.0, 1.0), (0.0, -1.0)
    assert shadow_area(alloc, grid, spec, from_south) < shadow_area(alloc, grid, spec, from_north)

    solo = rect_spec_dict(6, 5, rooms=rooms[:1], objectives=["shadow"], light_directions=[[0, 1]])
    south_room_only = spec_from_dict({**solo, "windows": [{"edge": [[0, 0], [6, 0]]}]})
    assert shadow_area(alloc, grid, south_room_only, from_south) == 0.0

    assert shadow_area(alloc, grid, bare, from_south) > shadow_area(alloc, grid, spec, from_south)


# -- 7 ------------------------------------------------------------------------------------------


def domination_matrix_fronts(objs):
    n = len(objs)
    dom = [[dominates(objs[i], objs[j]) for j in range(n)] for i in range(n)]
    left, fronts = set(range(n)), []
    while left:
        front = sorted(j for j in left if not any(dom[i][j] for i in left))
        fronts.append(front)
        left -= set(front)
    return fronts


@criterion(7, "non-dominated sort and crowding distance match oracles")
def test_c7_sort_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, m = int(rng.integers(1, 31)), int(rng.integers(2, 5))
        objs = [tuple(float(v) for v in row) for row in rng.integers(0, 6, size=(n, m))]
        assert [sorted(f) for f in fast_nondominated_sort(objs)] == domination_matrix_fronts(objs)


@criterion(7, "non-dominated sort and crowding distance match oracles")
def test_c7_crowding_hand_values():
    assert crowding_distance([(0, 2), (1, 1), (2, 0)]) == [INF, 2.0, INF]


# -- 8 ------------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_run():
    spec = bundled("house.json")
    cfg = OptimizerConfig(population_size=20, generations=40, seed=DESK_SEED)
    started = time.perf_counter()
    archive = evolve(spec, cfg)
    return spec, cfg, archive, time.perf_counter() - started


DESK = "desk run on the bundled house: runtime, non-dominance, C = 0 and reachable, no regression"


@criterion(8, DESK)
def test_c8_runtime(desk_run):
    assert desk_run[3] < 300.0


@criterion(8, DESK)
def test_c8_mutually_non_dominated(desk_run):
    objs = [m.objectives for m in desk_run[2].pareto]
    for a, b in itertools.permutations(objs, 2):
        assert not dominates(a, b)


@criterion(8, DESK)
def test_c8_zero_conflict_and_reachable(desk_run):
    spec, cfg, archive, _ = desk_run
    grid = build_grid(spec)
    cands = entrance_candidate_cells(spec, grid)
    found = False
    for member in archive.pareto:
        ph = express(member.genome, spec, grid, cands, cfg.constants, cfg.shorten_factor)
        c = conflict_area(ph.decoded.fields, ph.alloc, grid.cell_size)
        if c == 0.0 and all(ph.pattern.reachable):
            found = True
    assert found


@criterion(8, DESK)
def test_c8_front_not_regressed(desk_run):
    archive = desk_run[2]
    first, last = archive.front_objectives(1), archive.front_objectives(40)
    # the final front as a set is not dominated: no member is dominated by a generation-1 member
    for b in last:
        assert not any(dominates(a, b) for a in first)


# -- 9 ------------------------------------------------------------------------------------------


def scaled_spec(side):
    k = side / 20
    table = [("L", "living", 6, 8, 6, 9), ("B", "bedroom", 4, 6, 4, 6),
             ("T", "bathroom", 3, 4, 3, 4), ("K", "kitchen", 4, 6, 3, 5)]
    rooms = [{"name": n, "kind": kd, "width": [w0 * k, w1 * k], "height": [h0 * k, h1 * k]}
             for n, kd, w0, w1, h0, h1 in table]
    return spec_from_dict(rect_spec_dict(
        side, side, rooms=rooms, entrances=[[side / 2 + 0.5, 0]],
        objectives=["area_minus_conflict", "circulation", "shadow", "adjacency"],
        light_directions=[[0, 1]], all_walls_windows=True, adjacency=[[0, 3]],
    ))


@criterion(9, "single-layout time scales no worse than N^2.3")
def test_c9_complexity():
    sizes, times = [], []
    for side in (20, 40, 80):
        spec = scaled_spec(side)
        grid = build_grid(spec)
        cands = entrance_candidate_cells(spec, grid)
        rng = np.random.default_rng(side)
        for _ in range(5):
            g = rng.random(genome_length(spec))
            started = time.perf_counter()
            express(g, spec, grid, cands)
            sizes.append(grid.inside_count)
            times.append(time.perf_counter() - started)
    assert sorted(set(sizes)) == [400, 1600, 6400]
    alpha = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    print(f"fitted exponent {alpha:.3f}")
    assert alpha <= 2.3


# -- 10 -----------------------------------------------------------------------------------------


@criterion(10, "two identical generate runs give byte-identical trees")
def test_c10_determinism(tmp_path):
    house = str(files("fieldplan").joinpath("data/house.json"))
    args = ["--seed", str(DESK_SEED), "--pop", "20", "--gens", "40"]
    trees = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["generate", house, *args, "-o", str(out)]) == 0
        trees.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert trees[0] == trees[1]
    assert len(trees[0]) >= 5
