"""Built-in worlds for the experiments: straight run, exploration, walkers, enclosed goal, gap."""

import math

import numpy as np

from .grid_map import GridSpec
from .nav_controller import NavConfig
from .robot_sim import Pose
from .scenario import EntitySpec, Scenario


def blank(width_m, height_m, resolution):
    spec = GridSpec(int(round(width_m / resolution)), int(round(height_m / resolution)), resolution)
    return spec, np.zeros(spec.shape, dtype=bool)


def fill_rect(spec, wall, x0, y0, x1, y1):
    """Mark every cell whose centre lies in ``[x0, x1] x [y0, y1]``."""
    xs = spec.origin[0] + (np.arange(spec.width_cells) + 0.5) * spec.resolution
    ys = spec.origin[1] + (np.arange(spec.height_cells) + 0.5) * spec.resolution
    mx = (xs >= x0) & (xs <= x1)
    my = (ys >= y0) & (ys <= y1)
    wall[np.ix_(my, mx)] = True
    return wall


def border(spec, wall, thickness=None):
    t = thickness or spec.resolution
    w, h = spec.extent
    fill_rect(spec, wall, 0, 0, w, t)
    fill_rect(spec, wall, 0, h - t, w, h)
    fill_rect(spec, wall, 0, 0, t, h)
    fill_rect(spec, wall, w - t, 0, w, h)
    return wall


def ring(spec, wall, center, radius, thickness):
    xs = spec.origin[0] + (np.arange(spec.width_cells) + 0.5) * spec.resolution
    ys = spec.origin[1] + (np.arange(spec.height_cells) + 0.5) * spec.resolution
    X, Y = np.meshgrid(xs, ys)
    d = np.hypot(X - center[0], Y - center[1])
    wall |= (d >= radius - thickness / 2) & (d <= radius + thickness / 2)
    return wall


def straight(seed=1):
    """Empty world, goal 3 m dead ahead."""
    spec, wall = blank(6.0, 3.0, 0.1)
    return Scenario(
        spec=spec,
        truth_wall=wall,
        provided_wall=wall.copy(),
        start=Pose(1.05, 1.55, 0.0),
        goal=(4.05, 1.55),
        seed=seed,
        cfg=NavConfig(resolution=0.1),
        max_sim_time=60.0,
        name="straight",
        provided_empty=True,
    )


def exploration(seed=1):
    """Empty provided map; two staggered wall segments between start and goal."""
    spec, wall = blank(8.0, 8.0, 0.1)
    border(spec, wall)
    fill_rect(spec, wall, 0.0, 2.7, 5.0, 2.9)
    fill_rect(spec, wall, 3.0, 5.1, 8.0, 5.3)
    return Scenario(
        spec=spec,
        truth_wall=wall,
        provided_wall=np.zeros_like(wall),
        start=Pose(1.5, 1.2, math.pi / 2),
        goal=(1.5, 6.8),
        seed=seed,
        cfg=NavConfig(resolution=0.1),
        max_sim_time=300.0,
        name="exploration",
        provided_empty=True,
    )


def dynamic(seed=1):
    """Complete map of a room with a central block; two random walkers; top right to bottom left."""
    spec, wall = blank(8.0, 8.0, 0.1)
    border(spec, wall)
    fill_rect(spec, wall, 3.2, 3.2, 4.8, 4.8)
    walkers = [
        EntitySpec(Pose(2.0, 5.8, -0.5), 0.2, 0.2),
        EntitySpec(Pose(5.8, 2.0, 2.5), 0.2, 0.2),
    ]
    return Scenario(
        spec=spec,
        truth_wall=wall,
        provided_wall=wall.copy(),
        start=Pose(7.0, 7.0, -3 * math.pi / 4),
        goal=(1.0, 1.0),
        seed=seed,
        cfg=NavConfig(resolution=0.1),
        entities=walkers,
        max_sim_time=200.0,
        name="dynamic",
    )


def unreachable(seed=1):
    """Empty provided map; the goal sits inside a closed ring of objects."""
    spec, wall = blank(10.0, 8.0, 0.1)
    border(spec, wall)
    ring(spec, wall, (6.5, 4.0), 1.3, 0.2)
    return Scenario(
        spec=spec,
        truth_wall=wall,
        provided_wall=np.zeros_like(wall),
        start=Pose(1.5, 4.0, 0.0),
        goal=(6.5, 4.0),
        seed=seed,
        cfg=NavConfig(resolution=0.1, timeout=120.0),
        max_sim_time=130.0,
        name="unreachable",
        provided_empty=True,
    )


def gap_world(resolution=0.05):
    """Room split by a wall with a 0.75 m gap on the left and a wide doorway far right.

    Start and goal are at the left, on opposite sides of the wall, so the
    gap is the short way and the doorway the long detour.
    """
    spec, wall = blank(8.0, 4.0, resolution)
    border(spec, wall)
    # left border occupies x < 0.05; gap spans x in [0.05, 0.80]
    fill_rect(spec, wall, 0.80, 1.95, 6.4, 2.05)
    # doorway x in [6.4, 7.4], then wall to the right border
    fill_rect(spec, wall, 7.4, 1.95, 8.0, 2.05)
    start = (0.6, 3.2)
    goal = (0.6, 0.8)
    return spec, wall, start, goal


BUILTIN = {
    "straight": straight,
    "exploration": exploration,
    "dynamic": dynamic,
    "unreachable": unreachable,
}
