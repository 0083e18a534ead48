"""Command line: ``wavenav plan | run | dump-rules | scenario``.

Exit codes: 0 goal reached (or plan found), 2 not reached (NoPath, Timeout,
OffMap, blocked start or goal), 3 input error (bad file, schema, arguments).
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import fuzzy, grid_map, render, wavefront, worlds
from .errors import GoalBlocked, NoPath, StartBlocked, WavenavError
from .nav_controller import NavConfig
from .scenario import TRAJECTORY_COLUMNS, parse_scenario, run, seed_from_env, write_scenario

EXIT_OK, EXIT_NOT_REACHED, EXIT_INPUT = 0, 2, 3

RUN_EPILOG = f"""\
artifacts written to --out-dir:
  trajectory.csv   one row per tick, columns: {",".join(TRAJECTORY_COLUMNS)}
                   (t in s, x/y in m, theta in rad, v in m/s, omega in rad/s, state name)
  events.jsonl     one JSON object per controller event
  summary.json     reached, stop_reason, sim_time, path_length, replan_count,
                   min_clearance, collision_count, event_count, ticks, seed
  frames/          frame_NNNNNN.ppm every --render-every ticks (truth | robot map)
  report.png       trajectory and final map figure

the WAVENAV_SEED environment variable overrides the scenario seed; --seed
overrides both.
"""


def plan_once(grid, start, goal, cfg: NavConfig):
    """Inflate, propagate from ``goal``, descend from ``start`` and smooth.

    ``start`` and ``goal`` are world points.  Returns ``(cspace, field, plan,
    timings)`` with timings in seconds.
    """
    spec = grid.spec
    s = spec.world_to_cell(start)
    g = spec.world_to_cell(goal)
    t0 = time.perf_counter()
    cspace = grid_map.inflate(grid, cfg.inflation)
    t1 = time.perf_counter()
    if cspace.is_blocked(s):
        raise StartBlocked(f"start cell {s} is blocked")
    if cspace.is_blocked(g):
        raise GoalBlocked(f"goal cell {g} is blocked")
    field = wavefront.propagate(cspace, g, cfg.planning_metric)
    cells = wavefront.extract_path(field, s)
    t2 = time.perf_counter()
    plan = wavefront.plan_from_cells(cells, spec.resolution, cfg.min_step_length, cspace.blocked)
    t3 = time.perf_counter()
    timings = {"inflate": t1 - t0, "wavefront": t2 - t1, "smooth": t3 - t2, "total": t3 - t0}
    return cspace, field, plan, timings


def warm_up():
    """Load the compiled wavefront kernel so the first timed plan measures planning only."""
    spec = grid_map.GridSpec(2, 2, 1.0)
    wavefront.propagate(grid_map.CSpaceGrid(spec, np.zeros(spec.shape, bool)), (0, 0), wavefront.Metric.chamfer())


def _point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y got {text!r}") from None
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y got {text!r}")
    return tuple(vals)


def _cmd_plan(args):
    try:
        data = Path(args.map).read_bytes()
    except OSError as exc:
        print(f"error: cannot read map: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = NavConfig(resolution=args.resolution, metric=args.metric, safety_distance=args.safety_distance,
                    min_step_length=args.min_step)
    grid = grid_map.load_map(data, args.resolution)
    warm_up()
    try:
        cspace, field, plan, timings = plan_once(grid, args.start, args.goal, cfg)
    except (NoPath, StartBlocked, GoalBlocked) as exc:
        print(f"no path: {exc}")
        return EXIT_NOT_REACHED

    if not args.quiet:
        print("step,heading_deg,compass,length_m,end_x,end_y")
        for i, st in enumerate(plan.steps):
            x, y = grid.spec.cell_to_world(st.end_cell)
            print(f"{i},{math.degrees(st.heading):.2f},{st.compass or '-'},{st.length:.4f},{x:.3f},{y:.3f}")
    print(f"steps={len(plan.steps)} cells={len(plan.cells)} length_m={plan.length:.4f}")
    print(
        f"time_ms inflate={timings['inflate'] * 1e3:.2f} wavefront={timings['wavefront'] * 1e3:.2f} "
        f"smooth={timings['smooth'] * 1e3:.2f} total={timings['total'] * 1e3:.2f}"
    )
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "field.pgm").write_bytes(field.to_pgm())
        (out / "path.pgm").write_bytes(render.path_pgm(grid, cspace, plan.cells))
        render.plan_figure(grid, cspace, field, plan, out / "plan.png")
    return EXIT_OK


def _cmd_run(args):
    path = Path(args.scenario)
    try:
        scn = parse_scenario(path.read_text(), base_dir=path.parent)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INPUT
    seed = args.seed if args.seed is not None else seed_from_env(scn.seed)
    scn = scn.with_seed(seed)
    summary = run(scn, out_dir=args.out_dir, render_every=args.render_every, figure=args.out_dir is not None)
    if not args.quiet:
        print(json.dumps(summary.to_dict(), sort_keys=True))
    return EXIT_OK if summary.reached else EXIT_NOT_REACHED


def _cmd_dump_rules(args):
    print(fuzzy.format_tables(fuzzy.RuleBase.build(args.v_max, args.omega_max)))
    return EXIT_OK


def _cmd_scenario(args):
    make = worlds.BUILTIN[args.name]
    path = write_scenario(make(args.seed), args.out_dir)
    print(path)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="wavenav", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    pl = sub.add_parser("plan", help="plan once on a PGM map and print the motion steps")
    pl.add_argument("--map", required=True, help="PGM map, dark pixels (< 128) are walls")
    pl.add_argument("--resolution", type=float, default=0.1, help="metres per cell")
    pl.add_argument("--start", type=_point, required=True, help="x,y in metres")
    pl.add_argument("--goal", type=_point, required=True, help="x,y in metres")
    pl.add_argument("--metric", default="chamfer", help="manhattan, chamfer or chamfer:W_ORTH,W_DIAG")
    pl.add_argument("--safety-distance", type=float, default=0.07, help="metres added to the robot radius")
    pl.add_argument("--min-step", type=float, default=0.3, help="steps shorter than this are smoothed away")
    pl.add_argument("--out-dir", help="write field.pgm, path.pgm and plan.png here")
    pl.add_argument("--quiet", action="store_true", help="omit the step table")
    pl.set_defaults(func=_cmd_plan)

    rn = sub.add_parser(
        "run", help="simulate a scenario", epilog=RUN_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter
    )
    rn.add_argument("--scenario", required=True, help="scenario JSON; map paths are relative to it")
    rn.add_argument("--out-dir", help="artifact directory")
    rn.add_argument("--seed", type=int, help="override the scenario seed")
    rn.add_argument("--render-every", type=int, default=0, help="write a PPM frame every N ticks (0: none)")
    rn.add_argument("--quiet", action="store_true", help="do not print the summary")
    rn.set_defaults(func=_cmd_run)

    dr = sub.add_parser("dump-rules", help="print the rule tables and membership functions")
    dr.add_argument("--v-max", type=float, default=0.3)
    dr.add_argument("--omega-max", type=float, default=1.0)
    dr.set_defaults(func=_cmd_dump_rules)

    sc = sub.add_parser("scenario", help="write a built-in scenario as JSON plus PGM maps")
    sc.add_argument("name", choices=sorted(worlds.BUILTIN))
    sc.add_argument("--out-dir", required=True)
    sc.add_argument("--seed", type=int, default=1)
    sc.set_defaults(func=_cmd_scenario)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (WavenavError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
