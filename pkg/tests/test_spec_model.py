import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon

from fieldplan.spec_model import (
    DesignSpec,
    SpecError,
    build_grid,
    cell_center,
    entrance_candidate_cells,
    load_spec,
    spec_from_dict,
)

from conftest import bundled, rect_spec, rect_spec_dict

NOTCHED = [[0, 0], [10, 0], [10, 6], [6, 6], [6, 10], [0, 10]]


def test_load_minimal_round_trip(minimal_bytes):
    spec = load_spec(io.BytesIO(minimal_bytes))
    assert isinstance(spec, DesignSpec)
    assert len(spec.rooms) == 1
    again = spec_from_dict(spec.to_dict())
    assert again == spec
    assert again.fingerprint() == spec.fingerprint()


def test_load_accepts_text_and_bytes(minimal_bytes):
    assert load_spec(minimal_bytes) == load_spec(minimal_bytes.decode())


def test_reversed_range_rejected():
    rooms = [{"name": "A", "kind": "bedroom", "width": [5, 3], "height": [3, 4]}]
    with pytest.raises(SpecError, match="range lo > hi") as err:
        spec_from_dict(rect_spec_dict(rooms=rooms))
    assert err.value.path == "rooms[0].width"


def test_window_off_envelope_rejected():
    data = rect_spec_dict(windows=[{"edge": [[1, 1], [4, 1]]}])
    with pytest.raises(SpecError, match="window"):
        spec_from_dict(data)


@pytest.mark.parametrize(
    "patch, fragment",
    [
        ({"objectives": ["area", "circulation"]}, "unknown objective"),
        ({"envelope": [[0, 0], [0, 10], [12, 10], [12, 0]]}, "counterclockwise"),
        ({"envelope": [[0, 0], [12, 0], [12, 10], [3, 12]]}, "axis-aligned"),
        ({"entrances": []}, "entrance"),
        ({"entrances": [[5, 5]]}, "boundary"),
        ({"cell_size": 0}, "positive"),
        ({"adjacency": [[0, 4]]}, "invalid room index"),
        ({"open_plan": [[0, 9]]}, "invalid room index"),
        ({"objectives": ["shadow"]}, "light_directions"),
        ({"light_directions": [[0, 0]]}, "zero-length"),
    ],
)
def test_invariant_violations(patch, fragment):
    data = rect_spec_dict()
    data.update(patch)
    with pytest.raises(SpecError, match=fragment):
        spec_from_dict(data)


def test_range_narrower_than_cell_rejected():
    rooms = [{"name": "A", "kind": "bedroom", "width": [3, 3.5], "height": [3, 4]}]
    with pytest.raises(SpecError, match="one cell_size"):
        spec_from_dict(rect_spec_dict(rooms=rooms))


def test_parse_failure():
    with pytest.raises(SpecError, match="parse failure"):
        load_spec(b"{not json")


def test_self_intersecting_envelope_rejected():
    bowtie = [[0, 0], [4, 0], [4, 4], [2, 4], [2, -2], [0, -2]]
    with pytest.raises(SpecError):
        spec_from_dict(rect_spec_dict(envelope=bowtie))


def test_all_walls_windows_flag():
    spec = spec_from_dict(rect_spec_dict(all_walls_windows=True))
    assert len(spec.windows) == 4


def test_light_directions_normalised():
    spec = spec_from_dict(rect_spec_dict(light_directions=[[0, 3]]))
    assert spec.light_directions == ((0.0, 1.0),)


def test_habitable_defaults_from_kind():
    rooms = [
        {"name": "L", "kind": "living", "width": [3, 4], "height": [3, 4]},
        {"name": "B", "kind": "bathroom", "width": [2, 3], "height": [2, 3]},
        {"name": "K", "kind": "kitchen", "width": [2, 3], "height": [2, 3], "habitable": True},
    ]
    spec = spec_from_dict(rect_spec_dict(rooms=rooms))
    assert [r.habitable for r in spec.rooms] == [True, False, True]


# -- grid ------------------------------------------------------------------------


def test_rectangle_cell_count():
    grid = build_grid(rect_spec(12, 10))
    assert grid.inside_count == 120
    assert (grid.columns, grid.rows) == (12, 10)


def _brute_force_count(vertices, s, cols, rows):
    poly = Polygon(vertices)
    return sum(
        poly.contains(ShapelyPoint((c + 0.5) * s, (r + 0.5) * s))
        for r in range(rows)
        for c in range(cols)
    )


def test_notched_cell_count_matches_oracle():
    spec = spec_from_dict(rect_spec_dict(envelope=NOTCHED))
    grid = build_grid(spec)
    expected = _brute_force_count(NOTCHED, 1.0, 10, 10)
    assert expected == 84
    assert grid.inside_count == 84


def test_evergreen_pitch():
    spec = bundled("evergreen_508-512_601_604.json")
    u = 2 / 9
    assert spec.cell_size == pytest.approx(5 * u, abs=1e-12)
    assert spec.cell_size == pytest.approx(10 / 9, abs=1e-12)


def test_envelope_too_small():
    data = rect_spec_dict(2, 2, rooms=[{"name": "A", "kind": "other", "width": [1, 6], "height": [1, 6]}])
    data["cell_size"] = 5.0
    data["entrances"] = [[1, 0]]
    with pytest.raises(SpecError, match="too small"):
        build_grid(spec_from_dict(data))


def test_grid_deterministic(house_json_bytes):
    a = build_grid(load_spec(house_json_bytes))
    b = build_grid(load_spec(house_json_bytes))
    assert np.array_equal(a.inside_mask, b.inside_mask)
    assert a.boundary_edge_map == b.boundary_edge_map


def test_boundary_edge_map_marks_windows():
    spec = spec_from_dict(rect_spec_dict(4, 3, windows=[{"edge": [[0, 0], [4, 0]]}]))
    grid = build_grid(spec)
    assert grid.boundary_edge_map[(0, "south")] == (0, True)
    assert grid.boundary_edge_map[(0, "west")] == (3, False)
    assert (5, "south") not in grid.boundary_edge_map


rect_sizes = st.tuples(st.integers(3, 12), st.integers(3, 12))


@given(rect_sizes, st.sampled_from([1.0, 0.5]))
@settings(max_examples=40, deadline=None)
def test_resolution_monotonicity(size, s):
    w, h = size
    coarse = build_grid(spec_from_dict(rect_spec_dict(w, h, cell_size=s)))
    fine = build_grid(spec_from_dict(rect_spec_dict(w, h, cell_size=s / 2)))
    assert fine.inside_count >= 3 * coarse.inside_count


@st.composite
def rectilinear_polygons(draw):
    """Staircase polygons: a rectangle with a random notch cut from one corner."""
    w = draw(st.integers(4, 14)) + draw(st.sampled_from([0.0, 0.3, 0.5]))
    h = draw(st.integers(4, 14)) + draw(st.sampled_from([0.0, 0.7]))
    nx = draw(st.integers(1, int(w) - 2)) + draw(st.sampled_from([0.0, 0.5]))
    ny = draw(st.integers(1, int(h) - 2)) + draw(st.sampled_from([0.0, 0.25]))
    return [[0, 0], [w, 0], [w, h - ny], [w - nx, h - ny], [w - nx, h], [0, h]]


@given(rectilinear_polygons(), st.sampled_from([1.0, 0.5, 0.7]))
@settings(max_examples=60, deadline=None)
def test_inside_cells_strictly_inside(vertices, s):
    spec = spec_from_dict(rect_spec_dict(envelope=vertices, cell_size=s, entrances=[[1, 0]],
                                         rooms=[{"name": "A", "kind": "other", "width": [1, 2], "height": [1, 2]}]))
    grid = build_grid(spec)
    poly = Polygon(vertices)
    centres = grid.centers()
    for idx in range(grid.n_cells):
        pt = ShapelyPoint(*centres[idx])
        # centres that sit on an edge in exact arithmetic may land an ulp either side
        if poly.exterior.distance(pt) < 1e-9:
            assert not grid.inside_flat[idx]
            continue
        assert bool(grid.inside_flat[idx]) == poly.contains(pt)


# -- cell_center -------------------------------------------------------------------


def test_cell_center_examples():
    grid = build_grid(rect_spec(12, 10))
    assert cell_center(grid, (0, 0)) == (0.5, 0.5)
    assert cell_center(grid, 0) == (0.5, 0.5)
    grid2 = build_grid(spec_from_dict(rect_spec_dict(12, 10, cell_size=2.0)))
    assert cell_center(grid2, (3, 1)) == (7.0, 3.0)
    assert cell_center(grid2, grid2.index_of(3, 1)) == (7.0, 3.0)


def test_cell_center_out_of_range():
    grid = build_grid(rect_spec(12, 10))
    with pytest.raises(IndexError):
        cell_center(grid, 120)
    with pytest.raises(IndexError):
        cell_center(grid, (12, 0))


# -- entrances ------------------------------------------------------------------------


def test_entrance_on_south_wall_midpoint():
    spec = spec_from_dict(rect_spec_dict(12, 10, entrances=[[6.5, 0]]))
    grid = build_grid(spec)
    assert entrance_candidate_cells(spec, grid) == [grid.index_of(6, 0)]


def test_two_candidates_row_major():
    spec = spec_from_dict(rect_spec_dict(12, 10, entrances=[[0, 7.5], [3.5, 0]]))
    grid = build_grid(spec)
    cells = entrance_candidate_cells(spec, grid)
    assert cells == [grid.index_of(3, 0), grid.index_of(0, 7)]


def test_interior_candidate_rejected():
    spec = rect_spec(12, 10)
    bad = DesignSpec(**{**spec.__dict__, "entrance_candidates": ((6.0, 5.0),)})
    with pytest.raises(SpecError, match="no inside cell"):
        entrance_candidate_cells(bad, build_grid(bad))


def test_bundled_fixtures_load():
    for name in ["house.json", "house_4bed.json", "evergreen_513_605_609.json"]:
        spec = bundled(name)
        grid = build_grid(spec)
        assert entrance_candidate_cells(spec, grid)
    four = bundled("house_4bed.json")
    assert sum(r.kind == "bedroom" for r in four.rooms) == 4
    assert four.open_plan_groups == ((0, 1),)
    assert math.isclose(bundled("evergreen_513_605_609.json").rooms[0].width_range[1], 18.5 * 2 / 9)
