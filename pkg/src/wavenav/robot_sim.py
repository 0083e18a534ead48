"""Unicycle kinematics, arc-turn waypoint following and random-walking entities."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage


def normalize_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a <= -math.pi else a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def position(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float


STOP = VelocityCommand(0.0, 0.0)


def integrate(pose: Pose, cmd: VelocityCommand, dt: float) -> Pose:
    """Exact constant-(v, omega) motion over ``dt``: a straight line or a circular arc."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v, w = cmd.v, cmd.omega
    th = pose.theta
    if abs(w) < 1e-12:
        return Pose(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th)
    th1 = th + w * dt
    r = v / w
    return Pose(
        pose.x + r * (math.sin(th1) - math.sin(th)),
        pose.y - r * (math.cos(th1) - math.cos(th)),
        th1,
    )


def heading_error(pose: Pose, target) -> float:
    return normalize_angle(math.atan2(target[1] - pose.y, target[0] - pose.x) - pose.theta)


def follow_step(pose: Pose, waypoint, cfg) -> VelocityCommand:
    """Steer towards ``waypoint`` along an arc.

    The turn rate is proportional to the heading error and the forward speed
    falls with its cosine, so sharper turns give tighter arcs and errors of
    90 degrees or more turn on the spot.
    """
    err = heading_error(pose, waypoint)
    omega = max(-cfg.omega_max, min(cfg.omega_max, cfg.k_omega * err))
    v = cfg.v_max * max(0.0, math.cos(err))
    return VelocityCommand(v, omega)


def arc_radius(cmd: VelocityCommand) -> float:
    return math.inf if cmd.omega == 0 else abs(cmd.v / cmd.omega)


@dataclass
class DynamicEntity:
    """A disc that random-walks: holds a heading for a random leg, re-aims near obstacles."""

    pose: Pose
    radius: float
    speed: float
    rng: np.random.Generator = field(repr=False, default=None)
    leg_remaining: float = 0.0
    leg_range: tuple = (2.0, 6.0)
    lookahead: float = 0.3

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("entity radius must be > 0")


def clearance_map(world) -> np.ndarray:
    """Distance (m) from each cell centre to the nearest blocked cell centre; cached on ``world``."""
    cached = getattr(world, "_clearance", None)
    if cached is None:
        blocked = world.blocked
        if blocked.any():
            cached = ndimage.distance_transform_edt(~blocked) * world.spec.resolution
        else:
            cached = np.full(blocked.shape, np.inf)
        world._clearance = cached
    return cached


def point_clearance(world, p) -> float:
    spec = world.spec
    ix = math.floor((p[0] - spec.origin[0]) / spec.resolution)
    iy = math.floor((p[1] - spec.origin[1]) / spec.resolution)
    if not (0 <= ix < spec.width_cells and 0 <= iy < spec.height_cells):
        return -math.inf
    return float(clearance_map(world)[iy, ix])


def _free(world, p, radius, discs):
    # one-cell quantum of slack against cell-centre distances
    if point_clearance(world, p) < radius + world.spec.resolution:
        return False
    for d in discs:
        if math.hypot(p[0] - d.pose.x, p[1] - d.pose.y) < radius + d.radius + 0.05:
            return False
    return True


def _probe(world, e, heading, discs):
    dist = e.radius + e.lookahead
    n = max(2, int(math.ceil(dist / (0.5 * world.spec.resolution))))
    c, s = math.cos(heading), math.sin(heading)
    for k in range(1, n + 1):
        t = dist * k / n
        if not _free(world, (e.pose.x + t * c, e.pose.y + t * s), e.radius, discs):
            return False
    return True


def spawn_check(world, e):
    if not _free(world, (e.pose.x, e.pose.y), e.radius, ()):
        raise ValueError(f"entity at ({e.pose.x:.2f}, {e.pose.y:.2f}) overlaps a wall")


def step_entities(world, entities, dt: float, others=()) -> list:
    """Advance every entity by ``dt`` in list order.

    ``others`` are extra discs (``pose``, ``radius``) the entities steer clear
    of, typically the robot.  Each entity draws only from its own generator.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    for i, e in enumerate(entities):
        discs = [o for j, o in enumerate(entities) if j != i] + list(others)
        e.leg_remaining -= dt
        heading = e.pose.theta
        if e.leg_remaining <= 0:
            heading = e.rng.uniform(-math.pi, math.pi)
            e.leg_remaining = e.rng.uniform(*e.leg_range)
        if not _probe(world, e, heading, discs):
            for _ in range(16):
                heading = e.rng.uniform(-math.pi, math.pi)
                if _probe(world, e, heading, discs):
                    break
            else:
                e.pose = Pose(e.pose.x, e.pose.y, heading)
                continue
            e.leg_remaining = e.rng.uniform(*e.leg_range)
        nxt = (e.pose.x + e.speed * dt * math.cos(heading), e.pose.y + e.speed * dt * math.sin(heading))
        if _free(world, nxt, e.radius, discs):
            e.pose = Pose(nxt[0], nxt[1], heading)
        else:
            e.pose = Pose(e.pose.x, e.pose.y, heading)
    return entities
