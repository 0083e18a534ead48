"""Wavefront propagation, steepest-descent path extraction and motion-step compression."""

from dataclasses import dataclass
import math

import numba
import numpy as np

from . import pnm
from .errors import (
    GoalBlocked,
    NoPath,
    NonAdjacentCells,
    SourceBlocked,
    SourceOutOfBounds,
    StartBlocked,
)

UNREACHED = np.iinfo(np.int64).max

# clockwise from north; index doubles as the compass heading (k * 45 deg from N)
DIRECTIONS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
COMPASS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


@dataclass(frozen=True)
class Metric:
    """Edge weighting of the grid graph.

    ``manhattan`` uses the 4-neighbourhood with unit cost; ``chamfer`` adds the
    diagonals, weighted ``w_diag`` against ``w_orth`` for orthogonal moves.
    """

    name: str
    w_orth: int = 1
    w_diag: int = 1

    def __post_init__(self):
        if self.name not in ("manhattan", "chamfer"):
            raise ValueError(f"unknown metric {self.name!r}")
        if int(self.w_orth) != self.w_orth or int(self.w_diag) != self.w_diag:
            raise ValueError("metric weights must be integers")
        if self.w_orth < 1 or self.w_diag < 1:
            raise ValueError("metric weights must be >= 1")

    @classmethod
    def manhattan(cls):
        return cls("manhattan", 1, 1)

    @classmethod
    def chamfer(cls, w_orth=1, w_diag=1):
        return cls("chamfer", int(w_orth), int(w_diag))

    @classmethod
    def parse(cls, text):
        """``"manhattan"``, ``"chamfer"`` or ``"chamfer:2,3"``."""
        name, _, weights = text.partition(":")
        if name == "manhattan" and not weights:
            return cls.manhattan()
        if name == "chamfer":
            if not weights:
                return cls.chamfer()
            a, b = weights.split(",")
            return cls.chamfer(int(a), int(b))
        raise ValueError(f"unknown metric {text!r}")

    def __str__(self):
        if self.name == "manhattan":
            return "manhattan"
        return f"chamfer:{self.w_orth},{self.w_diag}"

    def moves(self):
        """``(direction index, dx, dy, weight)`` for every allowed move."""
        out = []
        for k, (dx, dy) in enumerate(DIRECTIONS):
            diagonal = dx != 0 and dy != 0
            if diagonal and self.name == "manhattan":
                continue
            out.append((k, dx, dy, self.w_diag if diagonal else self.w_orth))
        return out


@dataclass
class WavefrontField:
    spec: object
    value: np.ndarray  # int64 [iy, ix], UNREACHED where unreachable
    source: tuple
    metric: Metric

    def at(self, cell):
        return int(self.value[cell[1], cell[0]])

    def reached(self, cell):
        return self.value[cell[1], cell[0]] != UNREACHED

    def to_pgm(self) -> bytes:
        """Field scaled to 1..255 (near = dark), unreached cells 0."""
        v = self.value
        ok = v != UNREACHED
        img = np.zeros(v.shape, dtype=np.uint8)
        if ok.any():
            top = max(int(v[ok].max()), 1)
            img[ok] = (1 + np.rint(254 * v[ok] / top)).astype(np.uint8)
        return pnm.write_pgm(np.flipud(img), comments=[f"wavefront {self.metric} max scaled to 255"])


@dataclass(frozen=True)
class MotionStep:
    heading: float  # radians, world frame
    length: float  # metres
    end_cell: tuple

    @property
    def compass(self):
        k = round((math.pi / 2 - self.heading) / (math.pi / 4)) % 8
        if abs(_wrap(math.pi / 2 - k * math.pi / 4 - self.heading)) > 1e-9:
            return None
        return COMPASS[k]


@dataclass
class MotionPlan:
    cells: list
    steps: list
    waypoints: list

    @property
    def length(self):
        return sum(s.length for s in self.steps)


def _wrap(a):
    return math.atan2(math.sin(a), math.cos(a))


@numba.njit(cache=True)
def _dial(blocked, sx, sy, dxs, dys, ws, unreached):
    # Dijkstra with a circular bucket queue; weights are small positive ints
    h, w = blocked.shape
    n = h * w
    nb = ws.max() + 1
    value = np.full((h, w), unreached, dtype=np.int64)
    buckets = np.empty((nb, n), dtype=np.int64)
    counts = np.zeros(nb, dtype=np.int64)
    value[sy, sx] = 0
    buckets[0, 0] = sy * w + sx
    counts[0] = 1
    pending = 1
    d = 0
    nmoves = dxs.shape[0]
    while pending > 0:
        b = d % nb
        i = 0
        while i < counts[b]:
            flat = buckets[b, i]
            i += 1
            y = flat // w
            x = flat - y * w
            if value[y, x] != d:
                continue
            for m in range(nmoves):
                nx = x + dxs[m]
                ny = y + dys[m]
                if nx < 0 or ny < 0 or nx >= w or ny >= h or blocked[ny, nx]:
                    continue
                nd = d + ws[m]
                if nd < value[ny, nx]:
                    value[ny, nx] = nd
                    nbk = nd % nb
                    buckets[nbk, counts[nbk]] = ny * w + nx
                    counts[nbk] += 1
                    pending += 1
        pending -= counts[b]
        counts[b] = 0
        d += 1
    return value


def propagate(cspace, source, metric: Metric) -> WavefrontField:
    """Expand wavefronts from ``source`` over the unblocked cells of ``cspace``."""
    spec = cspace.spec
    if not spec.contains_cell(source):
        raise SourceOutOfBounds(f"source {source} outside grid")
    if cspace.blocked[source[1], source[0]]:
        raise SourceBlocked(f"source {source} is blocked")
    moves = metric.moves()
    dxs = np.array([m[1] for m in moves], dtype=np.int64)
    dys = np.array([m[2] for m in moves], dtype=np.int64)
    ws = np.array([m[3] for m in moves], dtype=np.int64)
    value = _dial(
        np.ascontiguousarray(cspace.blocked, dtype=np.bool_),
        int(source[0]),
        int(source[1]),
        dxs,
        dys,
        ws,
        UNREACHED,
    )
    return WavefrontField(spec, value, tuple(source), metric)


def extract_path(field: WavefrontField, start) -> list:
    """Descend the field from ``start`` to its source.

    Each move goes to a neighbour lying on a shortest route (its value plus
    the move weight equals the current value), choosing the lowest value
    among those.  Ties prefer the neighbour nearest the source, then the
    previous heading, then clockwise order from north.  With 4-neighbour
    moves the first two tie-breaks swap, otherwise every open diagonal
    would turn into a staircase.
    """
    spec = field.spec
    if not spec.contains_cell(start):
        raise StartBlocked(f"start {start} outside grid")
    value = field.value
    if value[start[1], start[0]] == UNREACHED:
        raise NoPath(f"no path from {start} to {field.source}")
    moves = field.metric.moves()
    w, h = spec.width_cells, spec.height_cells
    path = [tuple(start)]
    x, y = start
    prev = None
    cur = int(value[y, x])
    sx, sy = field.source
    heading_first = len(moves) == 4
    while cur > 0:
        best = None
        for k, dx, dy, wt in moves:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            nv = int(value[ny, nx])
            if nv == UNREACHED or nv + wt != cur:
                continue
            turn = 0 if k == prev else 1
            d2 = (nx - sx) ** 2 + (ny - sy) ** 2
            rank = (nv, turn, d2) if heading_first else (nv, d2, turn)
            if best is None or rank < best[0]:
                best = (rank, k, nx, ny, nv)
        _, prev, x, y, cur = best
        path.append((x, y))
    return path


def compress(cells, resolution: float = 1.0) -> list:
    """Group consecutive moves with the same heading into motion steps."""
    if len(cells) < 1:
        raise ValueError("path must contain at least one cell")
    steps = []
    run_k, run_n = None, 0
    for i in range(1, len(cells)):
        dx = cells[i][0] - cells[i - 1][0]
        dy = cells[i][1] - cells[i - 1][1]
        if (dx, dy) not in DIRECTIONS:
            raise NonAdjacentCells(f"{cells[i - 1]} -> {cells[i]}")
        k = DIRECTIONS.index((dx, dy))
        if k != run_k and run_k is not None:
            steps.append(_lattice_step(run_k, run_n, cells[i - 1], resolution))
            run_n = 0
        run_k = k
        run_n += 1
    if run_k is not None:
        steps.append(_lattice_step(run_k, run_n, cells[-1], resolution))
    return steps


def _lattice_step(k, n, end_cell, resolution):
    unit = math.sqrt(2.0) if k % 2 else 1.0
    return MotionStep(math.pi / 2 - k * math.pi / 4, n * unit * resolution, tuple(end_cell))


def smooth(steps, min_step_length: float, start_cell=None, resolution: float = 1.0, blocked=None, cells=None) -> list:
    """Absorb steps shorter than ``min_step_length`` into straight segments.

    Surviving waypoints (ends of long-enough steps, plus the final endpoint)
    are joined by straight segments, so the endpoint never moves.  Collinear
    neighbours are merged afterwards.

    With a ``blocked`` mask, a shortcut that would cross a blocked cell not
    on the original ``cells`` path is refused and the absorbed step ends in
    between are reinstated, so smoothing never cuts a corner into an
    obstacle.
    """
    if min_step_length <= 0 or not steps:
        return list(steps)
    if all(s.length >= min_step_length for s in steps):
        return list(steps)
    if start_cell is None:
        start_cell = _backtrack_start(steps, resolution)
    ends = [tuple(s.end_cell) for s in steps]
    keep = [s.length >= min_step_length for s in steps[:-1]] + [True]
    on_path = set(map(tuple, cells)) if cells is not None else set()

    def clear(a, b):
        return blocked is None or _segment_clear(blocked, a, b, on_path)

    chosen = []
    prev, last = tuple(start_cell), -1
    i = 0
    while i < len(ends):
        if not keep[i]:
            i += 1
            continue
        j = i
        while j > last + 1 and not clear(prev, ends[j]):
            j -= 1
        chosen.append(ends[j])
        prev, last = ends[j], j
        if j == i:
            i += 1

    out = []
    prev = start_cell
    for cell in chosen:
        dx, dy = cell[0] - prev[0], cell[1] - prev[1]
        if dx == 0 and dy == 0:
            continue
        seg = MotionStep(math.atan2(dy, dx), math.hypot(dx, dy) * resolution, tuple(cell))
        if out and _collinear(out[-1], seg):
            seg = MotionStep(out[-1].heading, out[-1].length + seg.length, seg.end_cell)
            out[-1] = seg
        else:
            out.append(seg)
        prev = cell
    return out


def _segment_clear(blocked, a, b, allowed=()):
    # sample at quarter-cell spacing, nearest cell centre
    n = max(1, int(math.ceil(4 * max(abs(b[0] - a[0]), abs(b[1] - a[1])))))
    for k in range(n + 1):
        t = k / n
        x = int(math.floor(a[0] + t * (b[0] - a[0]) + 0.5))
        y = int(math.floor(a[1] + t * (b[1] - a[1]) + 0.5))
        if blocked[y, x] and (x, y) not in allowed:
            return False
    return True


def _collinear(a, b):
    return abs(_wrap(a.heading - b.heading)) < 1e-12


def _backtrack_start(steps, resolution):
    # rewind the first lattice step to recover its start cell
    s = steps[0]
    k = round((math.pi / 2 - s.heading) / (math.pi / 4)) % 8
    dx, dy = DIRECTIONS[k]
    unit = math.sqrt(2.0) if k % 2 else 1.0
    n = round(s.length / (unit * resolution))
    return (s.end_cell[0] - n * dx, s.end_cell[1] - n * dy)


def make_plan(cspace, start, goal, metric: Metric, min_step_length: float) -> MotionPlan:
    """Plan from ``start`` to ``goal`` (cells): field from the goal, descent from the start."""
    spec = cspace.spec
    if not spec.contains_cell(start) or cspace.blocked[start[1], start[0]]:
        raise StartBlocked(f"start {start} is blocked")
    if not spec.contains_cell(goal) or cspace.blocked[goal[1], goal[0]]:
        raise GoalBlocked(f"goal {goal} is blocked")
    field = propagate(cspace, goal, metric)
    cells = extract_path(field, start)
    return plan_from_cells(cells, spec.resolution, min_step_length, cspace.blocked)


def plan_from_cells(cells, resolution, min_step_length, blocked=None) -> MotionPlan:
    """Compress and smooth an 8-connected cell path into a motion plan."""
    steps = compress(cells, resolution)
    steps = smooth(steps, min_step_length, tuple(cells[0]), resolution, blocked, cells)
    return MotionPlan(list(cells), steps, [s.end_cell for s in steps])


def escape_path(cspace, hard_blocked, start) -> list:
    """Shortest 8-connected route from ``start`` to the nearest unblocked c-space cell.

    Only cells free in ``hard_blocked`` (the uninflated map) are crossed.
    Returns ``[start]`` when the start is already free, ``None`` when no
    route exists.
    """
    from collections import deque

    if not cspace.blocked[start[1], start[0]]:
        return [tuple(start)]
    spec = cspace.spec
    prev = {tuple(start): None}
    queue = deque([tuple(start)])
    while queue:
        c = queue.popleft()
        if not cspace.blocked[c[1], c[0]]:
            out = []
            while c is not None:
                out.append(c)
                c = prev[c]
            return out[::-1]
        for dx, dy in DIRECTIONS:
            n = (c[0] + dx, c[1] + dy)
            if n in prev or not spec.contains_cell(n) or hard_blocked[n[1], n[0]]:
                continue
            prev[n] = c
            queue.append(n)
    return None


def path_length(cells, resolution=1.0):
    total = 0.0
    for a, b in zip(cells, cells[1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total * resolution
