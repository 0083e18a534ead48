import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import coa_dense, triangle
from wavenav.errors import EmptyScan
from wavenav.fuzzy import (
    DEFAULT_MEMBERSHIPS,
    Aggregate,
    AvoidanceCommand,
    MembershipFunction,
    RuleBase,
    Side,
    coa,
    format_tables,
    infer,
    infer_with_side,
    resolve_turn_table,
    rule_strengths,
    steering_settled,
    waypoint_side,
)
from wavenav.laser import LaserScan, beam_bearings
from wavenav.nav_controller import NavConfig
from wavenav.robot_sim import Pose

RB = RuleBase.build(0.3, 1.0)


def scan_with(obstacles, n=181, max_range=4.0):
    """Scan that is clear except for ``(bearing_deg, range)`` returns on the nearest beams."""
    b = beam_bearings(n)
    r = np.full(n, max_range)
    hits = np.zeros(n, bool)
    for deg, rng in obstacles:
        k = int(np.argmin(np.abs(b - math.radians(deg))))
        r[k], hits[k] = rng, True
    return LaserScan(b, r, hits, max_range)


def test_fuzzify_examples():
    g = RB.angle.fuzzify(0.0)
    assert g["ZE"] == 1.0 and g["NS"] == 0.0 and g["PS"] == 0.0
    assert RB.angle.fuzzify(-1.0)["NM"] == 1.0
    g = RB.angle.fuzzify(0.25)
    assert g["ZE"] == pytest.approx(0.5) and g["PS"] == pytest.approx(0.5)
    assert RB.angle.fuzzify(-7.0)["NM"] == 1.0  # clamped


@given(st.floats(-1.0, 1.0))
def test_membership_matches_oracle(x):
    for name, triples in DEFAULT_MEMBERSHIPS["angle"].items():
        assert RB.angle.terms[name](x) == pytest.approx(float(triangle(x, *triples)), abs=1e-12)


@given(st.floats(-1.0, 1.0))
def test_memberships_mirror_bit_exact(x):
    for a, b in (("NM", "PM"), ("NS", "PS"), ("ZE", "ZE")):
        assert RB.angle.terms[a](x) == RB.angle.terms[b](-x)
        assert RB.turn.terms[a](x) == RB.turn.terms[b](-x)


def test_variables_are_normal_and_cover():
    for var in (RB.angle, RB.distance, RB.speed, RB.turn):
        var.check()
        assert all(mf.height == 1.0 for mf in var.terms.values())


def test_membership_validation():
    with pytest.raises(ValueError):
        MembershipFunction(((0.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        MembershipFunction(((0.0, 0.0), (1.0, 1.5)))
    with pytest.raises(ValueError):
        MembershipFunction.triangle(1, 1, 1)


def test_waypoint_side():
    p = Pose(0.0, 0.0, 0.0)
    assert waypoint_side(p, (1, 1)) is Side.LEFT
    assert waypoint_side(p, (1, -1)) is Side.RIGHT
    assert waypoint_side(p, (2, 0)) is Side.LEFT


def test_resolve_examples():
    left, right = resolve_turn_table(RB, Side.LEFT), resolve_turn_table(RB, Side.RIGHT)
    assert left["ZE"]["ZE"] == "PM"
    assert right["PM"]["ZE"] == "NS"
    assert left["ZE"]["PS"] == right["ZE"]["PS"] == "NM"
    assert [left[d]["ZE"] for d in ("ZE", "PS", "PM")] == ["PM", "PM", "PS"]
    assert [right[d]["ZE"] for d in ("ZE", "PS", "PM")] == ["NM", "NM", "NS"]


def test_no_beam_in_range():
    cmd = infer_with_side(scan_with([(10, 2.0)]), Side.LEFT, RB, 1.1)
    assert cmd == AvoidanceCommand(0.3, 0.0, False)


def test_empty_scan_raises():
    empty = LaserScan(np.zeros(0), np.zeros(0), np.zeros(0, bool), 4.0)
    with pytest.raises(EmptyScan):
        infer_with_side(empty, Side.LEFT, RB, 1.1)


def test_obstacle_on_right_turns_left():
    assert infer_with_side(scan_with([(-45, 0.4)]), Side.RIGHT, RB, 1.1).turn_rate > 0
    assert infer_with_side(scan_with([(45, 0.4)]), Side.LEFT, RB, 1.1).turn_rate < 0


def _oracle_turn(scan, side, avoidance_range):
    # independent max-min inference with dense-quadrature centroid
    table = resolve_turn_table(RB, side)
    use = scan.hits & (scan.ranges <= avoidance_range)
    a = np.clip(scan.bearings[use] / (math.pi / 2), -1, 1)
    d = np.clip(scan.ranges[use] / avoidance_range, 0, 1)
    xs = np.linspace(-1.0, 1.0, 20001)
    agg = np.zeros_like(xs)
    for dt, dtri in DEFAULT_MEMBERSHIPS["distance"].items():
        for at, atri in DEFAULT_MEMBERSHIPS["angle"].items():
            s = np.max(np.minimum(triangle(d, *dtri), triangle(a, *atri))) if len(a) else 0.0
            out = table[dt][at]
            agg = np.maximum(agg, np.minimum(triangle(xs, *DEFAULT_MEMBERSHIPS["turn"][out]), s))
    return np.trapezoid(xs * agg, xs) / np.trapezoid(agg, xs)


def test_symmetric_pair_follows_waypoint_side():
    # each obstacle spans a few degrees, so its inner edge grades into angle ZE
    scan = scan_with([(s * d, 0.5) for s in (-1, 1) for d in range(40, 51)])
    for side, sign in ((Side.LEFT, 1), (Side.RIGHT, -1)):
        cmd = infer_with_side(scan, side, RB, 1.1)
        assert sign * cmd.turn_rate > 0
        assert cmd.turn_rate == pytest.approx(_oracle_turn(scan, side, 1.1), abs=2e-6)


def random_scan(seed, n=181):
    rng = np.random.default_rng(seed)
    b = beam_bearings(n)
    r = rng.uniform(0.05, 4.0, n)
    hits = rng.random(n) < 0.3
    r[~hits] = 4.0
    return LaserScan(b, r, hits, 4.0)


@given(st.integers(0, 2**32 - 1))
def test_output_bounds(seed):
    cmd = infer_with_side(random_scan(seed), Side.LEFT, RB, 1.1)
    assert 0.0 <= cmd.speed <= 0.3 and -1.0 <= cmd.turn_rate <= 1.0


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.1), st.floats(-90, 90))
def test_adding_beam_keeps_engagement(seed, rng_, deg):
    scan = random_scan(seed)
    k = int(np.argmin(np.abs(scan.bearings - math.radians(deg))))
    scan.ranges[k], scan.hits[k] = rng_, True
    assert infer_with_side(scan, Side.LEFT, RB, 1.1).engaged


@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Side)))
def test_mirror_property(seed, side):
    scan = random_scan(seed)
    a = infer_with_side(scan, side, RB, 1.1)
    b = infer_with_side(scan.mirrored(), side.mirrored(), RB, 1.1)
    assert abs(a.turn_rate + b.turn_rate) <= 1e-9
    assert a.speed == b.speed


def test_infer_uses_cfg():
    cfg = NavConfig()
    cmd = infer(scan_with([(-30, 0.5)]), Pose(0, 0, 0), (1, 1), RB, cfg)
    assert cmd.engaged and cmd.turn_rate > 0


def test_rule_strengths_none_when_clear():
    assert rule_strengths(scan_with([]), RB, 1.1) is None


def test_coa_symmetric_triangle_and_rectangle():
    tri = MembershipFunction.triangle(-0.2, 0.3, 0.8)
    assert coa(tri, -1, 1) == pytest.approx(0.3, abs=1e-12)
    rect = Aggregate([(MembershipFunction(((0.2, 1.0), (0.6, 1.0))), 1.0)], -1, 1)
    # the rectangle's sides are vertical to within one sample
    assert coa(lambda x: ((np.asarray(x) >= 0.2) & (np.asarray(x) <= 0.6)).astype(float), 0, 1, 2001) == pytest.approx(0.4, abs=1e-3)
    assert coa(rect, -1, 1) == pytest.approx(0.4, abs=1e-9)


def test_coa_empty_area():
    assert coa(Aggregate([], -1, 1), -1, 1, empty=0.0) == 0.0
    assert coa(Aggregate([], 0, 0.3), 0, 0.3, empty=0.3) == 0.3


# below ~1e-3 the clipped set is a sliver and the dense oracle's own O(h) error dominates
strength = st.one_of(st.just(0.0), st.floats(1e-3, 1.0))


@given(st.lists(strength, min_size=5, max_size=5))
def test_coa_matches_dense(strengths):
    terms = list(RB.turn.terms.values())
    agg = Aggregate(list(zip(terms, strengths)), -1.0, 1.0)
    if sum(strengths) == 0:
        return
    assert abs(coa(agg, -1.0, 1.0) - coa_dense(agg, -1.0, 1.0, 20001)) <= 1e-6 * 2.0


def test_steering_settled():
    eps = 0.2
    assert steering_settled(AvoidanceCommand(0.1, 0.0, True), eps)
    assert steering_settled(AvoidanceCommand(0.1, eps / 2, True), eps)
    assert not steering_settled(AvoidanceCommand(0.1, 2 * eps, True), eps)
    assert steering_settled(AvoidanceCommand(0.3, 2 * eps, False), eps)


def test_format_tables_mentions_both_sides():
    text = format_tables(RB)
    assert "waypoint left" in text and "waypoint right" in text
    assert "turn [-1, 1]" in text
