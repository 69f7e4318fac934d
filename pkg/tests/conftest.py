from __future__ import annotations

import json
from importlib.resources import files

import numpy as np
import pytest

from fieldplan.field_engine import FREE, OUTSIDE, Allocation
from fieldplan.spec_model import Grid, build_grid, load_spec, spec_from_dict


def rect_spec_dict(width=12, height=10, rooms=None, **extra):
    data = {
        "envelope": [[0, 0], [width, 0], [width, height], [0, height]],
        "entrances": [[width / 2, 0]],
        "rooms": rooms
        or [{"name": "A", "kind": "living", "width": [3, 5], "height": [3, 5]}],
        "cell_size": 1.0,
    }
    data.update(extra)
    return data


def rect_spec(width=12, height=10, rooms=None, **extra):
    return spec_from_dict(rect_spec_dict(width, height, rooms, **extra))


def bundled(name: str):
    return load_spec(files("fieldplan").joinpath(f"data/{name}").read_bytes())


def allocation_from_rows(rows: list[str], cell_size: float = 1.0) -> tuple[Grid, Allocation]:
    """Build a grid and allocation from a text picture, top row first.

    ``.`` is a free cell, ``#`` is outside the envelope, digits are rooms.
    """
    pic = [list(r) for r in reversed(rows)]
    n_rows, n_cols = len(pic), len(pic[0])
    spec = rect_spec(n_cols * cell_size, n_rows * cell_size, cell_size=cell_size)
    grid = build_grid(spec)
    owner = np.full(grid.n_cells, OUTSIDE, dtype=np.int64)
    mask = np.zeros((n_rows, n_cols), dtype=bool)
    n_rooms = 0
    for r, line in enumerate(pic):
        for c, ch in enumerate(line):
            idx = r * n_cols + c
            if ch == "#":
                continue
            mask[r, c] = True
            if ch == ".":
                owner[idx] = FREE
            else:
                owner[idx] = int(ch)
                n_rooms = max(n_rooms, int(ch) + 1)
    if not mask.all():
        grid = Grid(grid.origin, grid.cell_size, grid.columns, grid.rows, mask, {})
    return grid, Allocation(owner, max(n_rooms, 1), cell_size)


@pytest.fixture
def house_spec():
    return bundled("house.json")


@pytest.fixture
def house_json_bytes():
    return files("fieldplan").joinpath("data/house.json").read_bytes()


@pytest.fixture
def minimal_bytes():
    return json.dumps(rect_spec_dict()).encode()


# -- acceptance reporting ----------------------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "failed": []})
    if report.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "FAIL" if entry["failed"] else "PASS"
        detail = f" ({', '.join(entry['failed'])})" if entry["failed"] else ""
        terminalreporter.write_line(f"criterion {number:2d} {status}: {entry['title']}{detail}")
