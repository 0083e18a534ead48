import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ray_to_axis_wall
from wavenav.errors import PoseOutOfBounds
from wavenav.grid_map import GridSpec
from wavenav.laser import GroundTruthWorld, beam_bearings, simulate_scan
from wavenav.robot_sim import DynamicEntity, Pose

RES = 0.1


def world_with_wall_at(x_wall, w=60, h=60):
    spec = GridSpec(w, h, RES)
    blocked = np.zeros(spec.shape, bool)
    blocked[:, int(round(x_wall / RES)):] = True
    return GroundTruthWorld(spec, blocked)


def test_empty_world_all_max():
    world = GroundTruthWorld(GridSpec(200, 200, RES), np.zeros((200, 200), bool))
    s = simulate_scan(world, Pose(10.0, 10.0, 0.3), max_range=4.0)
    assert (s.ranges == 4.0).all() and not s.hits.any()


def test_bearings():
    b = beam_bearings(181)
    assert np.allclose(np.degrees(b), np.arange(-90, 91))
    with pytest.raises(ValueError):
        beam_bearings(1)


def test_wall_dead_ahead():
    s = simulate_scan(world_with_wall_at(3.0), Pose(2.0, 3.0, 0.0))
    assert 1.0 - RES <= s.ranges[90] <= 1.0 + RES
    assert s.hits[90]


@given(st.floats(0.5, 2.5), st.floats(1.0, 5.0), st.floats(-1.4, 1.4))
def test_axis_wall_matches_geometry(px, py, theta):
    world = world_with_wall_at(3.0)
    s = simulate_scan(world, Pose(px, py, theta), max_range=4.0)
    for bearing, r, hit in s.beams:
        exact = ray_to_axis_wall(px, py, theta + bearing, 3.0)
        y_end = py + exact * math.sin(theta + bearing)
        if exact <= 4.0 - 2 * RES and 0.2 < y_end < 5.8:
            assert hit and abs(r - exact) <= RES * math.sqrt(2)
        elif exact > 4.0 + 2 * RES:
            assert not hit and r == 4.0


def test_pose_out_of_bounds():
    with pytest.raises(PoseOutOfBounds):
        simulate_scan(world_with_wall_at(3.0), Pose(-0.1, 1.0, 0.0))


def test_determinism_with_noise():
    world = world_with_wall_at(3.0)
    a = simulate_scan(world, Pose(2.0, 3.0), noise_sd=0.01, rng=np.random.default_rng(5))
    b = simulate_scan(world, Pose(2.0, 3.0), noise_sd=0.01, rng=np.random.default_rng(5))
    assert np.array_equal(a.ranges, b.ranges) and np.array_equal(a.hits, b.hits)
    clean = simulate_scan(world, Pose(2.0, 3.0))
    assert not np.array_equal(a.ranges, clean.ranges)
    assert (a.ranges > 0).all() and (a.ranges <= 4.0).all()


def test_entity_seen_and_occluded():
    world = world_with_wall_at(3.0)
    world.entities.append(DynamicEntity(Pose(2.5, 3.0), 0.2, 0.0))
    s = simulate_scan(world, Pose(1.5, 3.0, 0.0))
    assert s.ranges[90] == pytest.approx(0.8)
    # behind the wall: never shortens the beam
    world.entities[0] = DynamicEntity(Pose(4.0, 3.0), 0.2, 0.0)
    clear = simulate_scan(world_with_wall_at(3.0), Pose(1.5, 3.0, 0.0))
    assert np.array_equal(simulate_scan(world, Pose(1.5, 3.0, 0.0)).ranges, clear.ranges)


def test_mirrored_scan():
    s = simulate_scan(world_with_wall_at(3.0), Pose(2.0, 2.0, 0.4))
    m = s.mirrored()
    assert np.array_equal(m.bearings, -s.bearings[::-1])
    assert np.array_equal(m.ranges, s.ranges[::-1])
    assert np.array_equal(m.mirrored().ranges, s.ranges)
