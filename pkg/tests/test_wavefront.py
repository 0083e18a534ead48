import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import grid_dijkstra
from wavenav.errors import GoalBlocked, NoPath, NonAdjacentCells, SourceBlocked, SourceOutOfBounds, StartBlocked
from wavenav.grid_map import CSpaceGrid, GridSpec
from wavenav.wavefront import (
    DIRECTIONS,
    UNREACHED,
    Metric,
    MotionStep,
    compress,
    extract_path,
    make_plan,
    path_length,
    propagate,
    smooth,
)

METRICS = [Metric.manhattan(), Metric.chamfer(), Metric.chamfer(2, 3)]


def cspace(blocked, res=1.0):
    blocked = np.asarray(blocked, dtype=bool)
    h, w = blocked.shape
    return CSpaceGrid(GridSpec(w, h, res), blocked)


def empty(w, h, res=1.0):
    return cspace(np.zeros((h, w), bool), res)


def test_first_ring():
    f = propagate(empty(3, 3), (1, 1), Metric.chamfer())
    assert f.value.tolist() == [[1, 1, 1], [1, 0, 1], [1, 1, 1]]
    f = propagate(empty(3, 3), (1, 1), Metric.manhattan())
    assert f.value.tolist() == [[2, 1, 2], [1, 0, 1], [2, 1, 2]]


def test_empty_grid_distances():
    yy, xx = np.mgrid[0:13, 0:17]
    src = (5, 9)
    dx, dy = np.abs(xx - src[0]), np.abs(yy - src[1])
    assert np.array_equal(propagate(empty(17, 13), src, Metric.chamfer()).value, np.maximum(dx, dy))
    assert np.array_equal(propagate(empty(17, 13), src, Metric.manhattan()).value, dx + dy)
    assert np.array_equal(
        propagate(empty(17, 13), src, Metric.chamfer(2, 3)).value,
        2 * np.abs(dx - dy) + 3 * np.minimum(dx, dy),
    )


def test_source_errors():
    b = np.zeros((4, 4), bool)
    b[1, 1] = True
    with pytest.raises(SourceBlocked):
        propagate(cspace(b), (1, 1), Metric.chamfer())
    with pytest.raises(SourceOutOfBounds):
        propagate(cspace(b), (4, 0), Metric.chamfer())


def test_unreached_sentinel_and_nopath():
    b = np.zeros((7, 7), bool)
    b[1:6, 1] = b[1:6, 5] = b[1, 1:6] = b[5, 1:6] = True
    f = propagate(cspace(b), (3, 3), Metric.chamfer())
    assert f.at((0, 0)) == UNREACHED and UNREACHED > f.value[f.value != UNREACHED].max()
    with pytest.raises(NoPath):
        extract_path(f, (0, 0))


def test_metric_parse():
    assert Metric.parse("chamfer:2,3") == Metric.chamfer(2, 3)
    assert str(Metric.parse("manhattan")) == "manhattan"
    for bad in ("euclid", "manhattan:1,1", "chamfer:0,1"):
        with pytest.raises(ValueError):
            Metric.parse(bad)


def grids(max_side=24):
    return st.tuples(st.integers(2, max_side), st.integers(2, max_side), st.integers(0, 2**32 - 1)).map(_random_grid)


def _random_grid(args):
    w, h, seed = args
    rng = np.random.default_rng(seed)
    b = rng.random((h, w)) < 0.25
    src = (int(rng.integers(w)), int(rng.integers(h)))
    b[src[1], src[0]] = False
    return b, src


@given(grids(), st.sampled_from(METRICS))
def test_field_equals_dijkstra(grid, metric):
    b, src = grid
    f = propagate(cspace(b), src, metric)
    d = grid_dijkstra(b, src, metric.w_orth, metric.w_diag, metric.name == "chamfer")
    ours = np.where(f.value == UNREACHED, np.inf, f.value.astype(float))
    assert np.array_equal(ours, d)


@given(grids(), st.sampled_from(METRICS))
def test_descent_properties(grid, metric):
    b, src = grid
    f = propagate(cspace(b), src, metric)
    allowed = {(dx, dy) for _, dx, dy, _ in metric.moves()}
    for y, x in np.argwhere(f.value != UNREACHED)[:10]:
        path = extract_path(f, (int(x), int(y)))
        assert path[0] == (x, y) and path[-1] == src
        assert len(set(path)) == len(path) <= b.size
        cost = 0
        for a, c in zip(path, path[1:]):
            d = (c[0] - a[0], c[1] - a[1])
            assert d in allowed and not b[c[1], c[0]]
            cost += metric.w_diag if d[0] and d[1] else metric.w_orth
        assert cost == f.at((x, y))


def test_start_at_source():
    assert extract_path(propagate(empty(5, 5), (2, 2), Metric.chamfer()), (2, 2)) == [(2, 2)]


def test_pure_diagonal():
    f = propagate(empty(9, 9), (0, 0), Metric.chamfer())
    path = extract_path(f, (6, 6))
    assert path == [(i, i) for i in range(6, -1, -1)]
    assert len(path) - 1 == f.at((6, 6))


def test_propagate_deterministic():
    b, src = _random_grid((30, 30, 7))
    a = propagate(cspace(b), src, Metric.chamfer())
    c = propagate(cspace(b), src, Metric.chamfer())
    assert np.array_equal(a.value, c.value)


def test_compress_examples():
    steps = compress([(i, 0) for i in range(5)], 0.1)
    assert len(steps) == 1 and steps[0].compass == "E" and steps[0].length == pytest.approx(0.4)
    assert len(compress([(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)])) == 2
    with pytest.raises(NonAdjacentCells):
        compress([(0, 0), (2, 0)])


@given(st.lists(st.sampled_from(DIRECTIONS), max_size=40), st.floats(0.01, 1.0))
def test_compress_preserves_length(moves, res):
    cells = [(0, 0)]
    for dx, dy in moves:
        cells.append((cells[-1][0] + dx, cells[-1][1] + dy))
    steps = compress(cells, res)
    assert sum(s.length for s in steps) == pytest.approx(path_length(cells, res))
    if steps:
        assert steps[-1].end_cell == cells[-1]


def test_smooth_identity_cases():
    steps = compress([(0, 0), (1, 0), (1, 1), (2, 1)])
    assert smooth(steps, 0.0) == steps
    long_steps = compress([(0, 0), (1, 0), (2, 0), (3, 0), (3, 1), (3, 2), (3, 3)])
    assert smooth(long_steps, 3.0) == long_steps


def test_smooth_staircase():
    cells = [(0, 0)]
    for i in range(10):
        dx, dy = ((1, 0), (0, 1))[i % 2]
        cells.append((cells[-1][0] + dx, cells[-1][1] + dy))
    steps = compress(cells)
    out = smooth(steps, 2.0, start_cell=(0, 0))
    assert len(out) == 1
    assert out[0].end_cell == (5, 5)
    assert out[0].heading == pytest.approx(math.pi / 4)


@given(st.lists(st.sampled_from(DIRECTIONS), min_size=1, max_size=40), st.floats(0.0, 5.0))
def test_smooth_keeps_endpoint_and_never_adds_steps(moves, min_len):
    cells = [(0, 0)]
    for dx, dy in moves:
        nxt = (cells[-1][0] + dx, cells[-1][1] + dy)
        if nxt not in cells:
            cells.append(nxt)
    steps = compress(cells)
    out = smooth(steps, min_len, start_cell=(0, 0))
    if steps:
        assert out[-1].end_cell == steps[-1].end_cell
    assert len(out) <= len(steps)


def test_smooth_refuses_shortcut_through_obstacle():
    b = np.zeros((8, 8), bool)
    b[1:4, 1:4] = True
    cells = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 4), (2, 4), (3, 4), (4, 4), (5, 5)]
    steps = compress(cells)
    out = smooth(steps, 10.0, start_cell=(0, 0), blocked=b, cells=cells)
    pts = [(0, 0)] + [s.end_cell for s in out]
    for a, c in zip(pts, pts[1:]):
        for t in np.linspace(0, 1, 50):
            x, y = a[0] + t * (c[0] - a[0]), a[1] + t * (c[1] - a[1])
            assert not b[int(round(y)), int(round(x))]
    assert out[-1].end_cell == (5, 5)


def test_make_plan_bearings():
    cs = empty(60, 60, 0.1)
    assert len(make_plan(cs, (5, 5), (35, 35), Metric.chamfer(), 0.3).steps) == 1
    # 30 degrees: 30 east, ~17 north
    plan = make_plan(cs, (5, 5), (35, 22), Metric.chamfer(), 0.3)
    assert [s.compass for s in plan.steps] == ["NE", "E"]
    assert plan.waypoints[-1] == (35, 22)


def test_make_plan_errors():
    b = np.zeros((9, 9), bool)
    b[2:7, 2] = b[2:7, 6] = b[2, 2:7] = b[6, 2:7] = True
    with pytest.raises(NoPath):
        make_plan(cspace(b), (0, 0), (4, 4), Metric.chamfer(), 0.0)
    with pytest.raises(GoalBlocked):
        make_plan(cspace(b), (0, 0), (2, 2), Metric.chamfer(), 0.0)
    with pytest.raises(StartBlocked):
        make_plan(cspace(b), (2, 4), (0, 0), Metric.chamfer(), 0.0)


def test_motion_step_compass_off_lattice():
    assert MotionStep(0.3, 1.0, (0, 0)).compass is None
