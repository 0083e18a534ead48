"""Fuzzy obstacle avoidance: max-min inference over laser beams with centre-of-area output.

Every beam within the avoidance range is fuzzified by normalised bearing
(bearing / 90 deg, in [-1, 1], negative = right of the robot) and normalised
distance (range / avoidance range, in [0, 1]).  Each (distance, angle) rule
fires with the minimum of its two antecedent grades; consequents are clipped
and aggregated across all rules and beams by pointwise maximum.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .errors import EmptyScan

ANGLE_TERMS = ("NM", "NS", "ZE", "PS", "PM")
DISTANCE_TERMS = ("ZE", "PS", "PM")
SPEED_TERMS = ("ZE", "PS", "PM")
TURN_TERMS = ("NM", "NS", "ZE", "PS", "PM")

# Triangles (left foot, apex, right foot); a repeated foot marks a shoulder.
# Speed and turn-rate breakpoints are fractions of v_max and omega_max.
DEFAULT_MEMBERSHIPS = {
    "angle": {
        "NM": (-1.0, -1.0, -0.5),
        "NS": (-1.0, -0.5, 0.0),
        "ZE": (-0.5, 0.0, 0.5),
        "PS": (0.0, 0.5, 1.0),
        "PM": (0.5, 1.0, 1.0),
    },
    "distance": {
        "ZE": (0.0, 0.0, 0.5),
        "PS": (0.0, 0.5, 1.0),
        "PM": (0.5, 1.0, 1.0),
    },
    "speed": {
        "ZE": (0.0, 0.0, 0.5),
        "PS": (0.0, 0.5, 1.0),
        "PM": (0.5, 1.0, 1.0),
    },
    "turn": {
        "NM": (-1.0, -1.0, -0.5),
        "NS": (-1.0, -0.5, 0.0),
        "ZE": (-0.5, 0.0, 0.5),
        "PS": (0.0, 0.5, 1.0),
        "PM": (0.5, 1.0, 1.0),
    },
}

# Rows: obstacle distance; columns: obstacle angle.
SPEED_TABLE = {
    "ZE": {"PM": "PS", "PS": "ZE", "ZE": "ZE", "NS": "ZE", "NM": "PS"},
    "PS": {"PM": "PS", "PS": "ZE", "ZE": "ZE", "NS": "ZE", "NM": "PS"},
    "PM": {"PM": "PM", "PS": "PS", "ZE": "ZE", "NS": "PS", "NM": "PM"},
}

# Angle-ZE cells hold a (turn right, turn left) pair resolved by waypoint side.
TURN_TABLE = {
    "ZE": {"PM": "NS", "PS": "NM", "ZE": ("NM", "PM"), "NS": "PM", "NM": "PS"},
    "PS": {"PM": "ZE", "PS": "NS", "ZE": ("NM", "PM"), "NS": "PS", "NM": "ZE"},
    "PM": {"PM": "ZE", "PS": "NS", "ZE": ("NS", "PS"), "NS": "PS", "NM": "ZE"},
}


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    def mirrored(self):
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class MembershipFunction:
    """Piecewise-linear membership function.

    ``points`` are ``(x, grade)`` pairs with strictly increasing ``x``.  Outside
    the first/last point the grade is 0, or held at the end grade when the
    matching shoulder flag is set.
    """

    points: tuple
    left_shoulder: bool = False
    right_shoulder: bool = False

    def __post_init__(self):
        xs = [p[0] for p in self.points]
        gs = [p[1] for p in self.points]
        if len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must have strictly increasing x")
        if any(not 0.0 <= g <= 1.0 for g in gs):
            raise ValueError("grades must lie in [0, 1]")
        object.__setattr__(self, "_xp", np.array(xs, dtype=float))
        object.__setattr__(self, "_gp", np.array(gs, dtype=float))

    @classmethod
    def triangle(cls, a, b, c):
        if a == b and b == c:
            raise ValueError("degenerate triangle")
        if a == b:
            return cls(((b, 1.0), (c, 0.0)), left_shoulder=True)
        if b == c:
            return cls(((a, 0.0), (b, 1.0)), right_shoulder=True)
        return cls(((a, 0.0), (b, 1.0), (c, 0.0)))

    def scaled(self, k):
        """Copy with every x multiplied by ``k > 0``."""
        return MembershipFunction(
            tuple((x * k, g) for x, g in self.points), self.left_shoulder, self.right_shoulder
        )

    @property
    def breakpoints(self):
        return [p[0] for p in self.points]

    @property
    def height(self):
        return max(p[1] for p in self.points)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xp, gp = self._xp, self._gp
        j = np.minimum(np.maximum(np.searchsorted(xp, x, side="right") - 1, 0), len(xp) - 2)
        x0, x1, g0, g1 = xp[j], xp[j + 1], gp[j], gp[j + 1]
        # written so that mirrored functions give bit-identical grades
        out = (g0 * (x1 - x) + g1 * (x - x0)) / (x1 - x0)
        below, above = x < xp[0], x > xp[-1]
        out = np.where(below, gp[0] if self.left_shoulder else 0.0, out)
        out = np.where(above, gp[-1] if self.right_shoulder else 0.0, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    terms: dict  # term name -> MembershipFunction

    def fuzzify(self, x):
        x = np.clip(x, self.lo, self.hi)
        return {t: mf(x) for t, mf in self.terms.items()}

    def check(self):
        for t, mf in self.terms.items():
            if abs(mf.height - 1.0) > 1e-12:
                raise ValueError(f"{self.name}.{t} is not a normal fuzzy set")
        xs = np.linspace(self.lo, self.hi, 1001)
        total = np.max([mf(xs) for mf in self.terms.values()], axis=0)
        if (total <= 0).any():
            raise ValueError(f"terms of {self.name} do not cover [{self.lo}, {self.hi}]")


def build_variable(name, triples, lo, hi, scale=1.0):
    terms = {t: MembershipFunction.triangle(*(v * scale for v in abc)) for t, abc in triples.items()}
    var = LinguisticVariable(name, lo * scale, hi * scale, terms)
    var.check()
    return var


@dataclass(frozen=True)
class RuleBase:
    angle: LinguisticVariable
    distance: LinguisticVariable
    speed: LinguisticVariable
    turn: LinguisticVariable
    speed_table: dict
    turn_table: dict

    @classmethod
    def build(cls, v_max=0.3, omega_max=1.0, memberships=None):
        m = dict(DEFAULT_MEMBERSHIPS)
        if memberships:
            m.update(memberships)
        return cls(
            angle=build_variable("angle", m["angle"], -1.0, 1.0),
            distance=build_variable("distance", m["distance"], 0.0, 1.0),
            speed=build_variable("speed", m["speed"], 0.0, 1.0, scale=v_max),
            turn=build_variable("turn", m["turn"], -1.0, 1.0, scale=omega_max),
            speed_table=SPEED_TABLE,
            turn_table=TURN_TABLE,
        )

    @property
    def v_max(self):
        return self.speed.hi

    @property
    def omega_max(self):
        return self.turn.hi


def resolve_turn_table(rulebase: RuleBase, side: Side) -> dict:
    """Concrete turn table: ambiguous cells turn towards the waypoint side."""
    pick = 1 if side is Side.LEFT else 0
    return {
        d: {a: (v[pick] if isinstance(v, tuple) else v) for a, v in row.items()}
        for d, row in rulebase.turn_table.items()
    }


def waypoint_side(pose, waypoint) -> Side:
    """Side of the heading line the waypoint lies on; dead ahead counts as left."""
    cross = math.cos(pose.theta) * (waypoint[1] - pose.y) - math.sin(pose.theta) * (waypoint[0] - pose.x)
    return Side.LEFT if cross >= 0 else Side.RIGHT


class Aggregate:
    """Pointwise max of membership functions clipped at their firing strengths."""

    def __init__(self, clipped, lo, hi):
        self.clipped = [(mf, float(s)) for mf, s in clipped if s > 0]
        self.lo, self.hi = lo, hi

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for mf, s in self.clipped:
            out = np.maximum(out, np.minimum(mf(x), s))
        return out

    def kinks(self):
        """Every x where the aggregate can change slope."""
        pts = {self.lo, self.hi}
        for mf, s in self.clipped:
            pts.update(mf.breakpoints)
            for (x0, g0), (x1, g1) in zip(mf.points, mf.points[1:]):
                if (g0 - s) * (g1 - s) < 0:
                    pts.add(x0 + (s - g0) * (x1 - x0) / (g1 - g0))
        base = sorted(p for p in pts if self.lo <= p <= self.hi)
        extra = []
        if len(self.clipped) > 1:
            vals = [np.minimum(mf(np.array(base)), s) for mf, s in self.clipped]
            for i in range(len(base) - 1):
                a, b = base[i], base[i + 1]
                for p in range(len(vals)):
                    for q in range(p + 1, len(vals)):
                        da = vals[p][i] - vals[q][i]
                        db = vals[p][i + 1] - vals[q][i + 1]
                        if da * db < 0:
                            extra.append(a + (b - a) * da / (da - db))
        return sorted(set(base).union(extra))


def _sample_grid(lo, hi, n):
    # symmetric about the domain midpoint, bit-exact under reflection
    half = (hi - lo) / 2.0
    mid = lo + half
    h = np.linspace(0.0, half, (n + 1) // 2)
    return np.concatenate([mid - h[::-1], mid + h[1:]])


def coa(fuzzy_set, lo: float, hi: float, n: int = 201, empty: float = 0.0) -> float:
    """Centre of area of ``fuzzy_set`` over ``[lo, hi]``.

    The set is sampled on ``n`` uniform points (plus its kinks, when it can
    report them) and the piecewise-linear interpolant is integrated exactly:
    trapezoids for the area, the matching linear moment for the numerator.
    Returns ``empty`` when the area is zero.
    """
    xs = _sample_grid(lo, hi, n)
    if hasattr(fuzzy_set, "kinks"):
        xs = np.union1d(xs, [k for k in fuzzy_set.kinks() if lo < k < hi])
    mu = np.asarray(fuzzy_set(xs), dtype=float)
    x0, x1 = xs[:-1], xs[1:]
    m0, m1 = mu[:-1], mu[1:]
    h = x1 - x0
    area = np.sum(h * (m0 + m1)) / 2.0
    if area <= 0.0:
        return empty
    moment = np.sum(h * (x0 * (2 * m0 + m1) + x1 * (m0 + 2 * m1))) / 6.0
    return float(min(max(moment / area, lo), hi))


@dataclass(frozen=True)
class AvoidanceCommand:
    speed: float
    turn_rate: float
    engaged: bool


def rule_strengths(scan, rulebase: RuleBase, avoidance_range: float):
    """Max over in-range beams of min(angle grade, distance grade), per (distance, angle) cell.

    Returns ``None`` when no beam is in range.
    """
    use = scan.hits & (scan.ranges <= avoidance_range)
    if not use.any():
        return None
    a = np.clip(scan.bearings[use] / (math.pi / 2), -1.0, 1.0)
    d = np.clip(scan.ranges[use] / avoidance_range, 0.0, 1.0)
    ag = rulebase.angle.fuzzify(a)
    dg = rulebase.distance.fuzzify(d)
    return {(dt, at): float(np.max(np.minimum(dg[dt], ag[at]))) for dt in dg for at in ag}


def infer_with_side(scan, side: Side, rulebase: RuleBase, avoidance_range: float, n_samples: int = 201):
    if len(scan.ranges) == 0:
        raise EmptyScan("scan has no beams")
    strengths = rule_strengths(scan, rulebase, avoidance_range)
    if strengths is None:
        return AvoidanceCommand(rulebase.v_max, 0.0, False)
    turn_table = resolve_turn_table(rulebase, side)
    speed_s = {t: 0.0 for t in rulebase.speed.terms}
    turn_s = {t: 0.0 for t in rulebase.turn.terms}
    for (dt, at), s in strengths.items():
        st = rulebase.speed_table[dt][at]
        tt = turn_table[dt][at]
        speed_s[st] = max(speed_s[st], s)
        turn_s[tt] = max(turn_s[tt], s)
    sp, tr = rulebase.speed, rulebase.turn
    speed = coa(Aggregate([(sp.terms[t], s) for t, s in speed_s.items()], sp.lo, sp.hi), sp.lo, sp.hi, n_samples, empty=sp.hi)
    turn = coa(Aggregate([(tr.terms[t], s) for t, s in turn_s.items()], tr.lo, tr.hi), tr.lo, tr.hi, n_samples, empty=0.0)
    return AvoidanceCommand(speed, turn, True)


def infer(scan, pose, waypoint, rulebase: RuleBase, cfg) -> AvoidanceCommand:
    """Avoidance command for one scan, steering ambiguous frontal cases towards ``waypoint``."""
    side = waypoint_side(pose, waypoint)
    return infer_with_side(scan, side, rulebase, cfg.avoidance_range, getattr(cfg, "coa_samples", 201))


def steering_settled(cmd: AvoidanceCommand, eps: float) -> bool:
    return (not cmd.engaged) or abs(cmd.turn_rate) < eps


def format_tables(rulebase: RuleBase) -> str:
    """Human-readable dump of the speed table and both turn-table resolutions."""
    cols = ("PM", "PS", "ZE", "NS", "NM")
    lines = []

    def block(title, table):
        lines.append(title)
        lines.append("dist\\angle " + " ".join(f"{c:>3}" for c in cols))
        for d in ("ZE", "PS", "PM"):
            lines.append(f"{d:>10} " + " ".join(f"{table[d][c]:>3}" for c in cols))
        lines.append("")

    block("speed", rulebase.speed_table)
    block("turn-rate, waypoint left", resolve_turn_table(rulebase, Side.LEFT))
    block("turn-rate, waypoint right", resolve_turn_table(rulebase, Side.RIGHT))
    for var in (rulebase.angle, rulebase.distance, rulebase.speed, rulebase.turn):
        lines.append(f"{var.name} [{var.lo:g}, {var.hi:g}]")
        for t, mf in var.terms.items():
            pts = ", ".join(f"({x:g}, {g:g})" for x, g in mf.points)
            flags = "".join(f" {f}" for f, on in (("left-shoulder", mf.left_shoulder), ("right-shoulder", mf.right_shoulder)) if on)
            lines.append(f"  {t}: {pts}{flags}")
    return "\n".join(lines)
