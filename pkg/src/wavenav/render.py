"""Raster frames (PPM) and matplotlib report figures."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import grid_map, pnm  # noqa: E402

WHITE = (255, 255, 255)
WALL = (0, 0, 180)
CSPACE = (150, 230, 230)
RECENT = (220, 0, 220)
AGED = (235, 215, 40)
ENTITY = (240, 140, 0)
ROBOT = (200, 0, 0)
TRAIL = (60, 60, 255)
PATH = (0, 0, 0)


def _scale_for(spec, target=400):
    return max(1, target // max(spec.width_cells, spec.height_cells))


def _to_px(spec, p, s):
    gx = (p[0] - spec.origin[0]) / spec.resolution
    gy = (p[1] - spec.origin[1]) / spec.resolution
    return int(gx * s), int((spec.height_cells - gy) * s)


def _dot(img, px, py, r, color):
    h, w, _ = img.shape
    for yy in range(max(0, py - r), min(h, py + r + 1)):
        for xx in range(max(0, px - r), min(w, px + r + 1)):
            if (xx - px) ** 2 + (yy - py) ** 2 <= r * r:
                img[yy, xx] = color


def _disc(img, spec, s, center, radius, color):
    px, py = _to_px(spec, center, s)
    _dot(img, px, py, max(1, int(radius / spec.resolution * s)), color)


def _polyline(img, spec, s, pts, color):
    for a, b in zip(pts, pts[1:]):
        (x0, y0), (x1, y1) = _to_px(spec, a, s), _to_px(spec, b, s)
        n = max(abs(x1 - x0), abs(y1 - y0), 1)
        for k in range(n + 1):
            x = x0 + (x1 - x0) * k // n
            y = y0 + (y1 - y0) * k // n
            if 0 <= y < img.shape[0] and 0 <= x < img.shape[1]:
                img[y, x] = color


def _cells(mask_rgb, s):
    img = np.flipud(mask_rgb)
    return np.repeat(np.repeat(img, s, axis=0), s, axis=1)


def frame(scn, world, ctrl, pose, trail) -> bytes:
    """Two panels: ground truth with entities (left), the robot's map and plan (right)."""
    spec = scn.spec
    s = _scale_for(spec)
    h, w = spec.shape

    left = np.full((h, w, 3), WHITE, dtype=np.uint8)
    left[world.blocked] = WALL
    left = _cells(left, s)
    for e in world.entities:
        _disc(left, spec, s, e.pose.position, e.radius, ENTITY)

    grid = ctrl.grid
    right = np.full((h, w, 3), WHITE, dtype=np.uint8)
    if ctrl.cspace is not None:
        right[ctrl.cspace.blocked] = CSPACE
    faded = (grid.confidence > 0) & ~grid.occupied
    right[faded] = AGED
    right[grid.occupied] = RECENT
    right[grid.wall] = WALL
    right = _cells(right, s)
    if ctrl.plan is not None:
        _polyline(right, spec, s, [spec.cell_to_world(c) for c in ctrl.plan.cells], PATH)

    for panel in (left, right):
        _polyline(panel, spec, s, trail, TRAIL)
        _disc(panel, spec, s, pose.position, scn.cfg.robot_radius, ROBOT)
    sep = np.zeros((h * s, 2, 3), dtype=np.uint8)
    return pnm.write_ppm(np.concatenate([left, sep, right], axis=1), comments=[f"t={ctrl.time:.1f}"])


def _extent(spec):
    x0, y0 = spec.origin
    ex, ey = spec.extent
    return (x0, x0 + ex, y0, y0 + ey)


def report_figure(scn, grid, ctrl, trail, plans, summary, path):
    """Ground truth with the driven trail next to the final robot map with every plan."""
    spec = scn.spec
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(11, 5.2))
    ext = _extent(spec)
    ax0.imshow(scn.truth_wall, origin="lower", extent=ext, cmap="Greys", vmin=0, vmax=1)
    tr = np.array(trail)
    ax0.plot(tr[:, 0], tr[:, 1], color="tab:blue", lw=1.5, label="trajectory")
    ax0.plot(*scn.start.position, "o", color="tab:green", label="start")
    ax0.plot(*scn.goal, "*", color="tab:red", ms=12, label="goal")
    ax0.set_title("ground truth")
    ax0.legend(loc="upper right", fontsize=8)

    conf = np.minimum(grid.confidence / grid.occupancy_threshold, 1.0)
    ax1.imshow(conf, origin="lower", extent=ext, cmap="magma_r", vmin=0, vmax=1)
    ax1.imshow(np.ma.masked_where(~grid.wall, grid.wall), origin="lower", extent=ext, cmap="winter", alpha=0.9)
    for i, pl in enumerate(plans):
        p = np.array(pl)
        ax1.plot(p[:, 0], p[:, 1], lw=0.8, color="k", alpha=0.25 + 0.75 * (i + 1) / len(plans))
    ax1.plot(tr[:, 0], tr[:, 1], color="tab:blue", lw=1)
    ax1.set_title(
        f"{summary.stop_reason}  t={summary.sim_time:.1f}s  replans={summary.replan_count}  "
        f"collisions={summary.collision_count}",
        fontsize=9,
    )
    for ax in (ax0, ax1):
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plan_figure(grid, cspace, field, plan, path):
    """Wavefront field with c-space and the smoothed plan overlaid."""
    spec = grid.spec
    ext = _extent(spec)
    fig, ax = plt.subplots(figsize=(6, 6))
    from .wavefront import UNREACHED

    vals = np.ma.masked_where(field.value == UNREACHED, field.value.astype(float))
    im = ax.imshow(vals, origin="lower", extent=ext, cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.8, label="wavefront cost")
    ax.imshow(np.ma.masked_where(~cspace.blocked, cspace.blocked), origin="lower", extent=ext, cmap="cool", alpha=0.5)
    ax.imshow(np.ma.masked_where(~grid.wall, grid.wall), origin="lower", extent=ext, cmap="Greys", vmin=0, vmax=1)
    cells = np.array([spec.cell_to_world(c) for c in plan.cells])
    ax.plot(cells[:, 0], cells[:, 1], color="w", lw=1, label="cell path")
    pts = [spec.cell_to_world(plan.cells[0])] + [spec.cell_to_world(c) for c in plan.waypoints]
    pts = np.array(pts)
    ax.plot(pts[:, 0], pts[:, 1], "o-", color="tab:red", ms=4, lw=1.5, label="motion steps")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def path_pgm(grid, cspace, cells) -> bytes:
    """Map with walls 0, c-space 160, path 64, free 255."""
    img = np.full(grid.spec.shape, 255, dtype=np.uint8)
    img[cspace.blocked] = 160
    img[grid.wall] = 0
    for x, y in cells:
        img[y, x] = 64
    return pnm.write_pgm(np.flipud(img), comments=["walls=0 cspace=160 path=64 free=255"])
