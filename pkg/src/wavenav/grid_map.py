"""Occupancy grid with fixed walls, detection counts, ageing and inflation.

Arrays are indexed ``[iy, ix]`` with ``iy`` growing along world +y, so row 0
of an array is the *bottom* of the map.  Image files are stored top row
first and are flipped on the way in and out.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage

from . import pnm
from .errors import OutOfBounds

CONFIDENCE_CAP_FACTOR = 4.0


@dataclass(frozen=True)
class GridSpec:
    width_cells: int
    height_cells: int
    resolution: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("grid dimensions must be >= 1")
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")

    @property
    def shape(self):
        return (self.height_cells, self.width_cells)

    @property
    def extent(self):
        return (self.width_cells * self.resolution, self.height_cells * self.resolution)

    def world_to_cell(self, p):
        """Cell ``(ix, iy)`` containing world point ``p``; raises OutOfBounds off the map."""
        ix = math.floor((p[0] - self.origin[0]) / self.resolution)
        iy = math.floor((p[1] - self.origin[1]) / self.resolution)
        if not (0 <= ix < self.width_cells and 0 <= iy < self.height_cells):
            raise OutOfBounds(f"point ({p[0]:.3f}, {p[1]:.3f}) is off the map")
        return (ix, iy)

    def cell_to_world(self, cell):
        """World coordinates of the centre of ``cell``."""
        return (
            self.origin[0] + (cell[0] + 0.5) * self.resolution,
            self.origin[1] + (cell[1] + 0.5) * self.resolution,
        )

    def contains_cell(self, cell):
        return 0 <= cell[0] < self.width_cells and 0 <= cell[1] < self.height_cells

    def contains_point(self, p):
        try:
            self.world_to_cell(p)
        except OutOfBounds:
            return False
        return True


@dataclass
class OccupancyGrid:
    spec: GridSpec
    wall: np.ndarray
    confidence: np.ndarray = None
    occupancy_threshold: float = 7.0
    cap_factor: float = field(default=CONFIDENCE_CAP_FACTOR, repr=False)

    def __post_init__(self):
        self.wall = np.asarray(self.wall, dtype=bool)
        if self.wall.shape != self.spec.shape:
            raise ValueError(f"wall shape {self.wall.shape} != grid shape {self.spec.shape}")
        if self.confidence is None:
            self.confidence = np.zeros(self.spec.shape)
        if not self.occupancy_threshold > 0:
            raise ValueError("occupancy threshold must be > 0")
        self.wall.setflags(write=False)

    @classmethod
    def empty(cls, spec, occupancy_threshold=7.0):
        return cls(spec, np.zeros(spec.shape, dtype=bool), occupancy_threshold=occupancy_threshold)

    @property
    def cap(self):
        return self.cap_factor * self.occupancy_threshold

    @property
    def occupied(self):
        """Object-occupied cells (confidence at or above threshold)."""
        return self.confidence >= self.occupancy_threshold

    @property
    def blocked(self):
        return self.wall | self.occupied

    def copy(self):
        return OccupancyGrid(
            self.spec,
            self.wall,
            self.confidence.copy(),
            self.occupancy_threshold,
            self.cap_factor,
        )

    def to_pgm(self) -> bytes:
        """Grayscale confidence map: walls 0, free 255, objects darken up to the threshold."""
        level = np.minimum(self.confidence / self.occupancy_threshold, 1.0)
        img = np.rint(255 - 254 * level).astype(np.uint8)
        img[self.wall] = 0
        return pnm.write_pgm(
            np.flipud(img),
            comments=[
                "confidence map: wall=0",
                f"object pixel = 255 - round(254 * min(confidence / {self.occupancy_threshold:g}, 1))",
                f"resolution {self.spec.resolution:g} m/cell origin {self.spec.origin[0]:g} {self.spec.origin[1]:g}",
            ],
        )


@dataclass
class CSpaceGrid:
    spec: GridSpec
    blocked: np.ndarray

    def is_blocked(self, cell):
        return bool(self.blocked[cell[1], cell[0]])


def load_map(data: bytes, resolution: float, threshold: float = 7.0, origin=(0.0, 0.0)) -> OccupancyGrid:
    """Build a grid from PGM bytes; pixels darker than 128 are walls."""
    pixels = pnm.read_pgm(data)
    h, w = pixels.shape
    spec = GridSpec(w, h, float(resolution), tuple(float(v) for v in origin))
    return OccupancyGrid(spec, np.flipud(pixels < 128), occupancy_threshold=threshold)


def walls_to_pgm(wall: np.ndarray) -> bytes:
    img = np.where(np.flipud(wall), 0, 255).astype(np.uint8)
    return pnm.write_pgm(img)


def mark_detections(grid: OccupancyGrid, pose, scan, map_range: float) -> OccupancyGrid:
    """Add one detection to every cell hit by a beam no longer than ``map_range``.

    Each cell is counted at most once per scan.  Endpoints off the map are
    skipped; wall cells are never incremented.
    """
    use = scan.hits & (scan.ranges <= map_range)
    if not use.any():
        return grid
    spec = grid.spec
    angle = pose.theta + scan.bearings[use]
    # nudge past the cell face the beam stopped on
    r = scan.ranges[use] + 1e-6
    ix = np.floor((pose.x + r * np.cos(angle) - spec.origin[0]) / spec.resolution).astype(np.int64)
    iy = np.floor((pose.y + r * np.sin(angle) - spec.origin[1]) / spec.resolution).astype(np.int64)
    inside = (ix >= 0) & (ix < spec.width_cells) & (iy >= 0) & (iy < spec.height_cells)
    flat = np.unique(iy[inside] * spec.width_cells + ix[inside])
    conf = grid.confidence.reshape(-1)
    flat = flat[~grid.wall.reshape(-1)[flat]]
    conf[flat] = np.minimum(conf[flat] + 1.0, grid.cap)
    return grid


def age_objects(grid: OccupancyGrid, aging_factor: float) -> OccupancyGrid:
    """Subtract ``aging_factor`` from every non-wall cell, clamping at zero."""
    if aging_factor < 0:
        raise ValueError("aging factor must be >= 0")
    free = ~grid.wall
    grid.confidence[free] = np.maximum(grid.confidence[free] - aging_factor, 0.0)
    return grid


def disc_footprint(radius_cells: float) -> np.ndarray:
    k = int(math.floor(radius_cells + 1e-9))
    d = np.arange(-k, k + 1)
    dx, dy = np.meshgrid(d, d)
    return dx * dx + dy * dy <= radius_cells * radius_cells + 1e-9


def inflate(grid: OccupancyGrid, inflation_radius: float) -> CSpaceGrid:
    """Block every cell whose centre is within ``inflation_radius`` of a blocked cell centre."""
    if inflation_radius < 0:
        raise ValueError("inflation radius must be >= 0")
    blocked = grid.blocked
    fp = disc_footprint(inflation_radius / grid.spec.resolution)
    if fp.shape[0] > 1 and blocked.any():
        blocked = ndimage.binary_dilation(blocked, structure=fp)
    return CSpaceGrid(grid.spec, blocked.copy())
