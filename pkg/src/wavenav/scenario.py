"""Scenario documents, the deterministic simulation loop and run artifacts.

Random streams: the scenario seed feeds ``numpy.random.SeedSequence``; its
spawned children drive a PCG64 generator each, in this fixed order:
stream 0 laser range noise, stream 1 odometry perturbation, stream 2 + i
dynamic entity ``i``.
"""

from dataclasses import dataclass, field
import io
import json
import math
import os
from pathlib import Path

import jsonschema
import numpy as np

from . import grid_map, render
from .errors import MapMismatch, SchemaError
from .grid_map import GridSpec, OccupancyGrid
from .laser import GroundTruthWorld, simulate_scan
from .nav_controller import NavConfig, NavController, StopReason
from .robot_sim import DynamicEntity, Pose, integrate, spawn_check, step_entities

TRAJECTORY_COLUMNS = ("t", "x", "y", "theta", "v", "omega", "state")

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_POSE = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}
_CONFIG_TYPES = {
    "metric": {"type": "string"},
    "memberships": {"type": "object"},
    "n_beams": {"type": "integer", "minimum": 2},
    "inflation_radius": {"type": ["number", "null"]},
    "goal_tolerance": {"type": ["number", "null"]},
    "timeout": {"type": ["number", "null"]},
    "coa_samples": {"type": "integer", "minimum": 3},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["ground_truth_map", "start", "goal", "seed"],
    "properties": {
        "name": {"type": "string"},
        "ground_truth_map": {"type": "string"},
        "provided_map": {"type": "string"},
        "resolution": {"type": "number", "exclusiveMinimum": 0},
        "origin": _POINT,
        "start": _POSE,
        "goal": _POINT,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "max_sim_time": {"type": "number", "exclusiveMinimum": 0},
        "entities": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["pose", "radius", "speed"],
                "properties": {
                    "pose": _POSE,
                    "radius": {"type": "number", "exclusiveMinimum": 0},
                    "speed": {"type": "number", "minimum": 0},
                },
            },
        },
        "config": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                name: _CONFIG_TYPES.get(name, _NUM)
                for name in NavConfig.field_names()
                if name != "resolution"
            },
        },
    },
}


@dataclass
class EntitySpec:
    pose: Pose
    radius: float
    speed: float


@dataclass
class Scenario:
    spec: GridSpec
    truth_wall: np.ndarray  # ground truth, bool [iy, ix]
    provided_wall: np.ndarray  # the map handed to the robot
    start: Pose
    goal: tuple
    seed: int
    cfg: NavConfig
    entities: list = field(default_factory=list)
    max_sim_time: float = 600.0
    name: str = "scenario"
    provided_empty: bool = False

    def with_seed(self, seed):
        return Scenario(**{**self.__dict__, "seed": int(seed)})


@dataclass
class RunSummary:
    reached: bool
    stop_reason: str
    sim_time: float
    path_length: float
    replan_count: int
    min_clearance: float
    collision_count: int
    events: list = field(default_factory=list)
    trajectory: list = field(default_factory=list, repr=False)
    ticks: int = 0
    seed: int = 0

    def to_dict(self):
        return {
            "reached": self.reached,
            "stop_reason": self.stop_reason,
            "sim_time": round(self.sim_time, 6),
            "path_length": round(self.path_length, 6),
            "replan_count": self.replan_count,
            "min_clearance": round(self.min_clearance, 6),
            "collision_count": self.collision_count,
            "event_count": len(self.events),
            "ticks": self.ticks,
            "seed": self.seed,
        }


def _pose(values):
    return Pose(float(values[0]), float(values[1]), float(values[2]) if len(values) > 2 else 0.0)


def parse_scenario(text: str, base_dir=".") -> Scenario:
    """Parse a JSON scenario; map paths are relative to ``base_dir``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = path + "." + extra[0] if extra else path
            raise SchemaError(path, f"unknown key {extra[0]!r}" if extra else err.message)
        raise SchemaError(path, err.message)

    base = Path(base_dir)
    resolution = float(doc.get("resolution", 0.1))
    origin = tuple(doc.get("origin", (0.0, 0.0)))
    overrides = dict(doc.get("config", {}))
    try:
        cfg = NavConfig(resolution=resolution, **overrides)
    except (TypeError, ValueError) as exc:
        raise SchemaError("$.config", str(exc)) from None

    truth = _load(base / doc["ground_truth_map"], resolution, origin)
    provided_name = doc.get("provided_map", "empty")
    if provided_name == "empty":
        provided = np.zeros(truth.spec.shape, dtype=bool)
    else:
        other = _load(base / provided_name, resolution, origin)
        if other.spec != truth.spec:
            raise MapMismatch(f"provided map {other.spec.shape} differs from ground truth {truth.spec.shape}")
        provided = other.wall
    entities = [EntitySpec(_pose(e["pose"]), float(e["radius"]), float(e["speed"])) for e in doc.get("entities", [])]
    return Scenario(
        spec=truth.spec,
        truth_wall=np.array(truth.wall),
        provided_wall=np.array(provided),
        start=_pose(doc["start"]),
        goal=(float(doc["goal"][0]), float(doc["goal"][1])),
        seed=int(doc["seed"]),
        cfg=cfg,
        entities=entities,
        max_sim_time=float(doc.get("max_sim_time", 600.0)),
        name=doc.get("name", "scenario"),
        provided_empty=provided_name == "empty",
    )


def _load(path, resolution, origin):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read map: {exc}") from None
    return grid_map.load_map(data, resolution, origin=origin)


def write_scenario(scn: Scenario, out_dir) -> Path:
    """Write ``scn`` as JSON plus PGM maps; returns the JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ground_truth.pgm").write_bytes(grid_map.walls_to_pgm(scn.truth_wall))
    doc = {
        "name": scn.name,
        "ground_truth_map": "ground_truth.pgm",
        "resolution": scn.spec.resolution,
        "origin": list(scn.spec.origin),
        "start": [scn.start.x, scn.start.y, scn.start.theta],
        "goal": list(scn.goal),
        "seed": scn.seed,
        "max_sim_time": scn.max_sim_time,
    }
    if scn.provided_empty:
        doc["provided_map"] = "empty"
    else:
        (out / "provided.pgm").write_bytes(grid_map.walls_to_pgm(scn.provided_wall))
        doc["provided_map"] = "provided.pgm"
    if scn.entities:
        doc["entities"] = [
            {"pose": [e.pose.x, e.pose.y, e.pose.theta], "radius": e.radius, "speed": e.speed} for e in scn.entities
        ]
    defaults = NavConfig(resolution=scn.cfg.resolution)
    overrides = {
        k: getattr(scn.cfg, k)
        for k in NavConfig.field_names()
        if k != "resolution" and getattr(scn.cfg, k) != getattr(defaults, k)
    }
    if overrides:
        doc["config"] = overrides
    path = out / "scenario.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def make_streams(seed: int, n_entities: int):
    children = np.random.SeedSequence(int(seed)).spawn(2 + n_entities)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def seed_from_env(seed):
    env = os.environ.get("WAVENAV_SEED")
    return int(env) if env not in (None, "") else seed


def true_clearance(world: GroundTruthWorld, p, window=1.5) -> float:
    """Distance from ``p`` to the nearest wall cell square or entity disc."""
    spec = world.spec
    res = spec.resolution
    gx = (p[0] - spec.origin[0]) / res
    gy = (p[1] - spec.origin[1]) / res
    k = int(math.ceil(window / res))
    x0, x1 = max(0, int(gx) - k), min(spec.width_cells, int(gx) + k + 1)
    y0, y1 = max(0, int(gy) - k), min(spec.height_cells, int(gy) + k + 1)
    best = window
    if x0 < x1 and y0 < y1:
        iy, ix = np.nonzero(world.blocked[y0:y1, x0:x1])
        if len(ix):
            ix = ix + x0
            iy = iy + y0
            dx = np.maximum(np.maximum(ix - gx, gx - (ix + 1)), 0.0)
            dy = np.maximum(np.maximum(iy - gy, gy - (iy + 1)), 0.0)
            best = min(best, float(np.min(np.hypot(dx, dy))) * res)
    for e in world.entities:
        best = min(best, math.hypot(p[0] - e.pose.x, p[1] - e.pose.y) - e.radius)
    return best


@dataclass
class _RobotDisc:
    pose: Pose
    radius: float


def run(scn: Scenario, out_dir=None, render_every: int = 0, figure: bool = False) -> RunSummary:
    """Simulate ``scn`` to completion.

    Per tick: entities step, the laser scans the ground truth from the true
    pose, the controller ticks, then the robot moves.  When ``out_dir`` is
    given the trajectory CSV, event log and summary JSON are written there
    (plus PPM frames every ``render_every`` ticks and, with ``figure``, a PNG
    report).
    """
    cfg = scn.cfg
    dt = cfg.dt
    streams = make_streams(scn.seed, len(scn.entities))
    laser_rng, odo_rng = streams[0], streams[1]
    entities = []
    world = GroundTruthWorld(scn.spec, scn.truth_wall)
    for es, rng in zip(scn.entities, streams[2:]):
        e = DynamicEntity(es.pose, es.radius, es.speed, rng=rng)
        spawn_check(world, e)
        e.leg_remaining = rng.uniform(*e.leg_range)
        entities.append(e)
    world.entities = entities

    grid = OccupancyGrid(scn.spec, scn.provided_wall, occupancy_threshold=cfg.occupancy_threshold)
    ctrl = NavController(grid, scn.start, scn.goal, cfg)
    ctrl.timeout = min(ctrl.timeout, scn.max_sim_time)
    pose = scn.start
    robot = _RobotDisc(pose, cfg.robot_radius)

    frames_dir = None
    if out_dir is not None and render_every > 0:
        frames_dir = Path(out_dir) / "frames"
        frames_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    trail = [pose.position]
    plans = []
    last_plan = None
    path_len = 0.0
    min_clear = true_clearance(world, pose.position)
    colliding = min_clear < cfg.robot_radius
    collisions = int(colliding)
    tick = 0
    while not ctrl.stopped:
        t = ctrl.time
        robot.pose = pose
        step_entities(world, entities, dt, others=[robot])
        if not scn.spec.contains_point(pose.position):
            ctrl.abort(StopReason.OFF_MAP)
            rows.append((t, pose, 0.0, 0.0, ctrl.state.value))
            break
        scan = simulate_scan(world, pose, cfg.n_beams, cfg.laser_range, cfg.noise_sd, laser_rng)
        cmd = ctrl.tick(scan, dt)
        rows.append((t, pose, cmd.v, cmd.omega, ctrl.state.value))
        if ctrl.plan is not last_plan:
            last_plan = ctrl.plan
            plans.append([scn.spec.cell_to_world(c) for c in last_plan.cells])
        new = integrate(pose, cmd, dt)
        if cfg.odometry_noise_sd > 0 and (cmd.v or cmd.omega):
            n = odo_rng.normal(0.0, cfg.odometry_noise_sd, 3)
            new = Pose(new.x + n[0], new.y + n[1], new.theta + n[2])
        path_len += math.dist(pose.position, new.position)
        pose = new
        trail.append(pose.position)
        clear = true_clearance(world, pose.position)
        min_clear = min(min_clear, clear)
        if clear < cfg.robot_radius and not colliding:
            collisions += 1
        colliding = clear < cfg.robot_radius
        tick += 1
        if frames_dir is not None and tick % render_every == 0:
            img = render.frame(scn, world, ctrl, pose, trail)
            (frames_dir / f"frame_{tick:06d}.ppm").write_bytes(img)

    summary = RunSummary(
        reached=ctrl.stop_reason is StopReason.REACHED_GOAL,
        stop_reason=ctrl.stop_reason.value,
        sim_time=ctrl.time,
        path_length=path_len,
        replan_count=ctrl.replan_count,
        min_clearance=min_clear,
        collision_count=collisions,
        events=list(ctrl.events),
        trajectory=rows,
        ticks=tick,
        seed=scn.seed,
    )
    if out_dir is not None:
        write_artifacts(summary, out_dir)
        if figure:
            render.report_figure(scn, grid, ctrl, trail, plans, summary, Path(out_dir) / "report.png")
    summary.final_grid = grid
    summary.trail = trail
    summary.plans = plans
    return summary


def trajectory_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
    for t, p, v, w, state in rows:
        buf.write(f"{t:.3f},{p.x:.6f},{p.y:.6f},{p.theta:.6f},{v:.6f},{w:.6f},{state}\n")
    return buf.getvalue()


def write_artifacts(summary: RunSummary, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(summary.trajectory))
    with open(out / "events.jsonl", "w") as fh:
        for ev in summary.events:
            fh.write(json.dumps(ev.to_record(), sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
