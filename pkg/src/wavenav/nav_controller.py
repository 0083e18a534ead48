"""Navigation state machine: map preparation, planning, path following and avoidance."""

from dataclasses import dataclass, field, fields, replace
import enum
import math

import numpy as np

from . import fuzzy, grid_map, wavefront
from .errors import (
    GoalOutOfBounds,
    NoPath,
    OutOfBounds,
    StartOutOfBounds,
    TickAfterStop,
)
from .robot_sim import STOP, Pose, VelocityCommand, follow_step, integrate


@dataclass(frozen=True)
class NavConfig:
    """Tunable parameters; defaults are the simulation profile."""

    resolution: float = 0.1
    robot_radius: float = 0.275
    safety_distance: float = 0.07
    inflation_radius: float = None  # None: robot_radius + safety_distance
    avoidance_range: float = 1.1
    occupancy_threshold: float = 7.0
    aging_factor: float = 0.14
    v_max: float = 0.3
    omega_max: float = 1.0
    eps_settle: float = 0.2
    min_step_length: float = 0.3
    goal_tolerance: float = None  # None: 1.5 * resolution
    timeout: float = None  # None: 10 * straight-line distance / v_max
    metric: str = "chamfer"
    memberships: dict = None
    k_omega: float = 1.5
    dt: float = 0.1
    map_range: float = 3.0
    laser_range: float = 4.0
    n_beams: int = 181
    noise_sd: float = 0.0
    odometry_noise_sd: float = 0.0
    coa_samples: int = 201
    guard_horizon: float = 1.0  # s; 0 disables the forward-clearance speed cap

    def __post_init__(self):
        positive = (
            "resolution", "robot_radius", "avoidance_range", "v_max", "omega_max",
            "eps_settle", "k_omega", "dt", "map_range", "laser_range",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in (
            "safety_distance", "aging_factor", "min_step_length", "noise_sd", "odometry_noise_sd", "guard_horizon",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.occupancy_threshold < 1:
            raise ValueError("occupancy_threshold must be >= 1")
        if self.n_beams < 2:
            raise ValueError("n_beams must be >= 2")
        wavefront.Metric.parse(self.metric)

    @classmethod
    def real_world(cls, **overrides):
        """Profile tuned for the physical robot: slower, higher threshold, slower ageing."""
        base = dict(occupancy_threshold=10.0, aging_factor=0.1, v_max=0.2, noise_sd=0.01)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def with_overrides(self, **kw):
        return replace(self, **kw)

    @property
    def inflation(self):
        if self.inflation_radius is not None:
            return self.inflation_radius
        return self.robot_radius + self.safety_distance

    @property
    def tolerance(self):
        if self.goal_tolerance is not None:
            return self.goal_tolerance
        return 1.5 * self.resolution

    @property
    def planning_metric(self):
        return wavefront.Metric.parse(self.metric)


# guard-capped follow speed below this fraction of v_max triggers a replan
STALL_FRACTION = 0.05
# closest a scan return may come to the robot disc edge (m)
GUARD_MARGIN = 0.01


class NavState(enum.Enum):
    INITIALISE = "Initialise"
    PREPARE_MAP = "PrepareMap"
    PLAN_PATH = "PlanPath"
    FOLLOW_PATH = "FollowPath"
    AVOID_OBSTACLES = "AvoidObstacles"
    STOP = "Stop"


class StopReason(enum.Enum):
    REACHED_GOAL = "ReachedGoal"
    NO_PATH = "NoPath"
    START_OR_GOAL_OCCUPIED = "StartOrGoalOccupied"
    TIMEOUT = "Timeout"
    OFF_MAP = "OffMap"


S = NavState
TRANSITIONS = frozenset(
    {
        (S.INITIALISE, S.PREPARE_MAP),
        (S.PREPARE_MAP, S.PLAN_PATH),
        (S.PLAN_PATH, S.FOLLOW_PATH),
        (S.FOLLOW_PATH, S.AVOID_OBSTACLES),
        # newly mapped objects block the path ahead
        (S.FOLLOW_PATH, S.PREPARE_MAP),
        (S.AVOID_OBSTACLES, S.PREPARE_MAP),
    }
    # timeout, off-map and arrival can end the run from any live state
    | {(s, S.STOP) for s in S if s is not S.STOP}
)


@dataclass(frozen=True)
class NavEvent:
    t: float
    kind: str  # StateChanged | PathPlanned | Replanned | ObstacleEngaged | GoalReached | Stopped
    data: dict = field(default_factory=dict)

    def to_record(self):
        return {"t": round(self.t, 6), "event": self.kind, **self.data}


class NavController:
    """Single-threaded controller; call :meth:`tick` once per control cycle.

    The controller keeps its own odometry pose by integrating the commands it
    issues, so perfect odometry means it tracks the simulated robot exactly.
    """

    def __init__(self, grid: grid_map.OccupancyGrid, start: Pose, goal, cfg: NavConfig = None):
        cfg = cfg or NavConfig(resolution=grid.spec.resolution)
        if cfg.resolution != grid.spec.resolution:
            cfg = cfg.with_overrides(resolution=grid.spec.resolution)
        spec = grid.spec
        if not spec.contains_point(start.position):
            raise StartOutOfBounds(f"start {start.position} outside map")
        if not spec.contains_point(goal):
            raise GoalOutOfBounds(f"goal {tuple(goal)} outside map")
        self.cfg = cfg
        self.grid = grid
        self.pose = start
        self.goal = (float(goal[0]), float(goal[1]))
        self.rulebase = fuzzy.RuleBase.build(cfg.v_max, cfg.omega_max, cfg.memberships)
        self.metric = cfg.planning_metric
        self.timeout = cfg.timeout
        if self.timeout is None:
            self.timeout = 10.0 * math.dist(start.position, self.goal) / cfg.v_max
        self.time = 0.0
        self.state = S.INITIALISE
        self.stop_reason = None
        self.events = []
        self.transitions = []
        self.cspace = None
        self._cs_cache = None
        self._dt = cfg.dt
        self._stalled = False
        self.plan = None
        self.waypoints = []
        self.wp_index = 0
        self.progress = 0
        self.plan_count = 0
        self.replan_count = 0
        self.last_avoidance = None
        self._replan_cause = None
        self._goto(S.PREPARE_MAP)

    # -- bookkeeping -------------------------------------------------------

    def _emit(self, kind, **data):
        self.events.append(NavEvent(self.time, kind, data))

    def _goto(self, new):
        old = self.state
        if (old, new) not in TRANSITIONS:
            raise RuntimeError(f"illegal transition {old.value} -> {new.value}")
        self.transitions.append((old, new))
        self.state = new
        self._emit("StateChanged", **{"from": old.value, "to": new.value})

    def _stop(self, reason: StopReason):
        if reason is StopReason.REACHED_GOAL:
            self._emit("GoalReached", x=round(self.pose.x, 6), y=round(self.pose.y, 6))
        self._goto(S.STOP)
        self.stop_reason = reason
        self._emit("Stopped", reason=reason.value)
        return STOP

    def abort(self, reason: StopReason):
        """Stop from outside the control loop (e.g. the simulator lost the robot)."""
        if self.state is not S.STOP:
            self._stop(reason)

    @property
    def stopped(self):
        return self.state is S.STOP

    @property
    def current_waypoint(self):
        if self.wp_index < len(self.waypoints):
            return self.waypoints[self.wp_index]
        return self.goal

    # -- state actions -----------------------------------------------------

    def _inflated(self):
        # re-dilate only when the blocked mask changed since the last call
        blocked = self.grid.blocked
        if self._cs_cache is None or not np.array_equal(self._cs_cache[0], blocked):
            self._cs_cache = (blocked, grid_map.inflate(self.grid, self.cfg.inflation))
        return self._cs_cache[1]

    def _prepare_map(self):
        self.cspace = self._inflated()
        self._goto(S.PLAN_PATH)

    def _plan_path(self):
        spec = self.grid.spec
        start = spec.world_to_cell(self.pose.position)
        goal = spec.world_to_cell(self.goal)
        if self.plan_count > 0:
            self.replan_count += 1
            self._emit("Replanned", cause=self._replan_cause)
        self.plan_count += 1
        hard = self.grid.blocked
        if hard[start[1], start[0]] or self.cspace.is_blocked(goal):
            return self._stop(StopReason.START_OR_GOAL_OCCUPIED)
        # inside the inflation band only: back out to the nearest free cell first
        escape = wavefront.escape_path(self.cspace, hard, start)
        if escape is None:
            return self._stop(StopReason.NO_PATH)
        try:
            plan = wavefront.make_plan(self.cspace, escape[-1], goal, self.metric, self.cfg.min_step_length)
        except NoPath:
            return self._stop(StopReason.NO_PATH)
        if len(escape) > 1:
            plan = wavefront.plan_from_cells(
                escape[:-1] + plan.cells, spec.resolution, self.cfg.min_step_length, self.cspace.blocked
            )
        self.plan = plan
        self.progress = 0
        pts = [spec.cell_to_world(c) for c in plan.waypoints[:-1]]
        self.waypoints = pts + [self.goal]
        self.wp_index = 0
        self._emit("PathPlanned", steps=len(plan.steps), length=round(plan.length, 6))
        self._goto(S.FOLLOW_PATH)
        return None

    def _path_blocked(self):
        """True when a plan cell ahead, beyond the inflation radius, is now blocked."""
        spec = self.grid.spec
        cells = self.plan.cells
        px, py = self.pose.position
        res = spec.resolution
        gx, gy = (px - spec.origin[0]) / res - 0.5, (py - spec.origin[1]) / res - 0.5
        # progress only moves forward, to the nearest cell within a short window
        lo = self.progress
        window = cells[lo : lo + 40]
        d2 = [(c[0] - gx) ** 2 + (c[1] - gy) ** 2 for c in window]
        self.progress = lo + d2.index(min(d2))
        cspace = self._inflated()
        near = (self.cfg.inflation / res + 1.0) ** 2
        for c in cells[self.progress :]:
            if cspace.blocked[c[1], c[0]] and (c[0] - gx) ** 2 + (c[1] - gy) ** 2 > near:
                return True
        return False

    def _advance_waypoints(self):
        spec = self.grid.spec
        # inside the inflation band, or right after a stall, waypoints must
        # really be reached rather than just approached
        tight = self._inflated().is_blocked(spec.world_to_cell(self.pose.position))
        while self.wp_index < len(self.waypoints) - 1:
            precise = tight or (self._stalled and self.wp_index == 0)
            tol = 0.5 * spec.resolution if precise else self.cfg.tolerance
            if math.dist(self.pose.position, self.waypoints[self.wp_index]) > tol:
                break
            self.wp_index += 1
            self._stalled = False

    def _avoidance(self, scan):
        cmd = fuzzy.infer(scan, self.pose, self.current_waypoint, self.rulebase, self.cfg)
        self.last_avoidance = cmd
        return cmd

    def tick(self, scan, dt: float = None) -> VelocityCommand:
        """Run one control cycle on ``scan`` and return the velocity command."""
        if self.state is S.STOP:
            raise TickAfterStop("controller already stopped")
        dt = self.cfg.dt if dt is None else dt
        self._dt = dt
        cmd = self._cycle(scan)
        if self.state is S.AVOID_OBSTACLES:
            cmd = self._guard(scan, cmd)
        self.pose = integrate(self.pose, cmd, dt)
        self.time += dt
        return cmd

    def _guard(self, scan, cmd):
        """Limit forward speed against the scan returns ahead.

        The speed is capped so the robot disc needs ``guard_horizon`` s to
        touch any return on a straight run, and a move whose arc over one
        tick would bring a return within ``GUARD_MARGIN`` of the disc (and
        closer than it already is) is cut to a turn on the spot.
        """
        h = self.cfg.guard_horizon
        if h <= 0 or cmd.v <= 0:
            return cmd
        r = self.cfg.robot_radius
        use = scan.hits
        if not use.any():
            return cmd
        px = scan.ranges[use] * np.cos(scan.bearings[use])
        py = scan.ranges[use] * np.sin(scan.bearings[use])
        v = cmd.v
        front = (px > 0) & (np.abs(py) < r)
        if front.any():
            free = float(np.min(px[front] - np.sqrt(r * r - py[front] ** 2)))
            v = min(v, max(0.0, free) / h)
        # one tick ahead, in the robot frame
        nxt = integrate(Pose(0.0, 0.0, 0.0), VelocityCommand(v, cmd.omega), self._dt)
        now = float(np.min(np.hypot(px, py)))
        after = float(np.min(np.hypot(px - nxt.x, py - nxt.y)))
        if after < r + GUARD_MARGIN and after < now:
            v = 0.0
        return VelocityCommand(v, cmd.omega)

    def _cycle(self, scan):
        cfg = self.cfg
        try:
            self.grid.spec.world_to_cell(self.pose.position)
        except OutOfBounds:
            return self._stop(StopReason.OFF_MAP)
        grid_map.mark_detections(self.grid, self.pose, scan, cfg.map_range)
        grid_map.age_objects(self.grid, cfg.aging_factor)
        if math.dist(self.pose.position, self.goal) <= cfg.tolerance:
            return self._stop(StopReason.REACHED_GOAL)
        if self.time > self.timeout:
            return self._stop(StopReason.TIMEOUT)
        stall_replanned = False
        while True:
            if self.state is S.PREPARE_MAP:
                self._prepare_map()
            elif self.state is S.PLAN_PATH:
                stopped = self._plan_path()
                if stopped is not None:
                    return stopped
            elif self.state is S.FOLLOW_PATH:
                if self._path_blocked():
                    self._replan_cause = "path_blocked"
                    self._goto(S.PREPARE_MAP)
                    continue
                self._advance_waypoints()
                avoid = self._avoidance(scan)
                if not fuzzy.steering_settled(avoid, cfg.eps_settle):
                    self._goto(S.AVOID_OBSTACLES)
                    self._emit("ObstacleEngaged", turn_rate=round(avoid.turn_rate, 6))
                    return VelocityCommand(avoid.speed, avoid.turn_rate)
                cmd = follow_step(self.pose, self.current_waypoint, cfg)
                capped = self._guard(scan, cmd)
                if cmd.v > 0 and capped.v < STALL_FRACTION * cfg.v_max and not stall_replanned:
                    stall_replanned = True
                    self._stalled = True
                    # something sits right in front: replan from here rather than wait
                    self._replan_cause = "blocked_ahead"
                    self._goto(S.PREPARE_MAP)
                    continue
                return capped
            elif self.state is S.AVOID_OBSTACLES:
                self._advance_waypoints()
                avoid = self._avoidance(scan)
                if fuzzy.steering_settled(avoid, cfg.eps_settle):
                    self._replan_cause = "avoidance_settled"
                    self._goto(S.PREPARE_MAP)
                    continue
                return VelocityCommand(avoid.speed, avoid.turn_rate)
            else:
                raise RuntimeError(f"unexpected state {self.state}")
