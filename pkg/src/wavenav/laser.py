"""Simulated 180 degree laser range finder.

Beams are cast through the ground-truth grid with an incremental cell walk
(every cell the ray crosses is visited) and intersected analytically with
the discs of dynamic entities.
"""

from dataclasses import dataclass, field
import math

import numba
import numpy as np

from .errors import PoseOutOfBounds

MIN_RANGE = 1e-6


@dataclass
class LaserScan:
    bearings: np.ndarray  # rad relative to heading, uniformly spaced over [-pi/2, pi/2]
    ranges: np.ndarray
    hits: np.ndarray  # bool
    max_range: float

    @property
    def beams(self):
        return list(zip(self.bearings.tolist(), self.ranges.tolist(), self.hits.tolist()))

    def __len__(self):
        return len(self.ranges)

    def mirrored(self):
        """Scan reflected left/right about the heading."""
        return LaserScan(-self.bearings[::-1], self.ranges[::-1].copy(), self.hits[::-1].copy(), self.max_range)


@dataclass
class GroundTruthWorld:
    spec: object  # GridSpec
    blocked: np.ndarray  # bool [iy, ix], static walls and objects
    entities: list = field(default_factory=list)  # DynamicEntity, moved by robot_sim

    def __post_init__(self):
        self.blocked = np.ascontiguousarray(self.blocked, dtype=bool)
        self.blocked.setflags(write=False)


def beam_bearings(n_beams: int) -> np.ndarray:
    if n_beams < 2:
        raise ValueError("need at least two beams")
    return np.linspace(-math.pi / 2, math.pi / 2, n_beams)


@numba.njit(cache=True)
def _cast(blocked, ox, oy, res, px, py, angles, max_range, out):
    # Amanatides-Woo traversal; returns entry distance of the first blocked cell
    h, w = blocked.shape
    for b in range(angles.shape[0]):
        dx = math.cos(angles[b])
        dy = math.sin(angles[b])
        gx = (px - ox) / res
        gy = (py - oy) / res
        cx = int(math.floor(gx))
        cy = int(math.floor(gy))
        if blocked[cy, cx]:
            out[b] = 0.0
            continue
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        if abs(dx) > 1e-15:
            next_x = (cx + (1 if dx > 0 else 0) - gx) * res / dx
            delta_x = res / abs(dx)
        else:
            next_x = np.inf
            delta_x = np.inf
        if abs(dy) > 1e-15:
            next_y = (cy + (1 if dy > 0 else 0) - gy) * res / dy
            delta_y = res / abs(dy)
        else:
            next_y = np.inf
            delta_y = np.inf
        r = np.inf
        while True:
            if next_x < next_y:
                t = next_x
                cx += step_x
                next_x += delta_x
            else:
                t = next_y
                cy += step_y
                next_y += delta_y
            if t > max_range:
                break
            if cx < 0 or cy < 0 or cx >= w or cy >= h:
                break
            if blocked[cy, cx]:
                r = t
                break
        out[b] = r


def _disc_hits(px, py, angles, entities):
    r = np.full(angles.shape, np.inf)
    if not entities:
        return r
    dx, dy = np.cos(angles), np.sin(angles)
    for e in entities:
        fx, fy = px - e.pose.x, py - e.pose.y
        bq = fx * dx + fy * dy
        c = fx * fx + fy * fy - e.radius * e.radius
        disc = bq * bq - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t = -bq - sq
        # origin inside the disc: report contact immediately
        t = np.where(c <= 0, 0.0, t)
        r = np.where(ok & (t >= 0) & (t < r), t, r)
    return r


def simulate_scan(world: GroundTruthWorld, pose, n_beams=181, max_range=4.0, noise_sd=0.0, rng=None, extra_discs=()) -> LaserScan:
    """Cast ``n_beams`` rays over the front half-plane of ``pose``.

    ``extra_discs`` are additional entity-like objects (``pose``, ``radius``)
    seen by the scanner, e.g. other robots.  When ``noise_sd > 0`` one normal
    draw per beam is taken from ``rng`` every scan.
    """
    spec = world.spec
    if not spec.contains_point((pose.x, pose.y)):
        raise PoseOutOfBounds(f"pose ({pose.x:.3f}, {pose.y:.3f}) outside world")
    bearings = beam_bearings(n_beams)
    angles = pose.theta + bearings
    walls = np.empty(n_beams)
    _cast(world.blocked, float(spec.origin[0]), float(spec.origin[1]), float(spec.resolution),
          float(pose.x), float(pose.y), angles, float(max_range), walls)
    ranges = np.minimum(walls, _disc_hits(pose.x, pose.y, angles, list(world.entities) + list(extra_discs)))
    hits = ranges <= max_range
    if noise_sd > 0:
        noise = rng.normal(0.0, noise_sd, n_beams)
        ranges = np.where(hits, ranges + noise, ranges)
    ranges = np.where(hits, np.clip(ranges, MIN_RANGE, max_range), max_range)
    return LaserScan(bearings, ranges, hits, float(max_range))
