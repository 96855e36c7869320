"""Kinematic bicycle model and pure-pursuit tracking of a closed reference path.

All quantities are physical (1:10 car) meters, seconds and radians; ``theta``
uses the math convention (counter-clockwise from +x).
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from coopcar.errors import GeometryError, StepError
from coopcar.positioning.frames import LocalPose

DEFAULT_WHEELBASE = 0.33
SPEED_TIME_CONSTANT_S = 0.3
MAX_STEP_S = 0.05


class Projection(NamedTuple):
    segment: int
    t: float
    x: float
    y: float
    distance: float


class LookaheadResult(NamedTuple):
    x: float
    y: float
    segment: int
    fallback: bool


class SteerCommand(NamedTuple):
    angle: float
    degenerate: bool


@dataclass(frozen=True)
class Path:
    waypoints: tuple[tuple[float, float], ...]
    closed: bool = True

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < (3 if self.closed else 2):
            raise GeometryError(f"path needs more waypoints, got {len(pts)}")
        s = [0.0]
        for (x0, y0), (x1, y1) in self._segment_pairs(pts):
            seg = math.hypot(x1 - x0, y1 - y0)
            if seg == 0:
                raise GeometryError("consecutive waypoints must be distinct")
            s.append(s[-1] + seg)
        object.__setattr__(self, "_arc", tuple(s))

    def _segment_pairs(self, pts):
        pairs = list(zip(pts, pts[1:]))
        if self.closed:
            pairs.append((pts[-1], pts[0]))
        return pairs

    @property
    def arc_lengths(self) -> tuple[float, ...]:
        """Cumulative arc length at each waypoint (plus the closing point if closed)."""
        return self._arc

    @property
    def length(self) -> float:
        return self._arc[-1]

    @property
    def n_segments(self) -> int:
        return len(self.waypoints) if self.closed else len(self.waypoints) - 1

    def segment(self, i: int) -> tuple[tuple[float, float], tuple[float, float]]:
        n = len(self.waypoints)
        return self.waypoints[i % n], self.waypoints[(i + 1) % n]

    def point_at(self, s: float) -> tuple[float, float, float]:
        """(x, y, tangent angle) at arc length ``s`` (wrapped on closed paths)."""
        if self.closed:
            s %= self.length
        else:
            s = min(max(s, 0.0), self.length)
        i = min(bisect.bisect_right(self._arc, s) - 1, self.n_segments - 1)
        (x0, y0), (x1, y1) = self.segment(i)
        seg = self._arc[i + 1] - self._arc[i]
        t = (s - self._arc[i]) / seg
        return x0 + t * (x1 - x0), y0 + t * (y1 - y0), math.atan2(y1 - y0, x1 - x0)

    def project(self, x: float, y: float, hint: int | None = None, window: int = 12) -> Projection:
        """Nearest point on the polyline; ``hint`` restricts the search around a segment."""
        n = self.n_segments
        if hint is None or 2 * window + 1 >= n:
            candidates = range(n)
        elif self.closed:
            candidates = ((hint + k) % n for k in range(-window, window + 1))
        else:
            candidates = range(max(0, hint - window), min(n, hint + window + 1))
        best = None
        for i in candidates:
            (x0, y0), (x1, y1) = self.segment(i)
            dx, dy = x1 - x0, y1 - y0
            t = ((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy)
            t = min(1.0, max(0.0, t))
            px, py = x0 + t * dx, y0 + t * dy
            d = math.hypot(x - px, y - py)
            if best is None or d < best.distance:
                best = Projection(i, t, px, py, d)
        assert best is not None
        return best

    def arc_at(self, proj: Projection) -> float:
        i = proj.segment
        return self._arc[i] + proj.t * (self._arc[i + 1] - self._arc[i])

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.waypoints])

    @classmethod
    def from_json(cls, text: str, closed: bool = True) -> Path:
        return cls(tuple((float(x), float(y)) for x, y in json.loads(text)), closed)


@dataclass(frozen=True)
class BicycleState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    wheelbase: float = DEFAULT_WHEELBASE

    def __post_init__(self) -> None:
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be > 0")
        if self.v < 0:
            raise ValueError("speed must be >= 0")

    def to_pose(self, timestamp: int) -> LocalPose:
        """Track-frame pose with heading in degrees clockwise from north."""
        return LocalPose(self.x, self.y, 90.0 - math.degrees(self.theta), self.v, timestamp)


@dataclass(frozen=True)
class PurePursuitConfig:
    lookahead: float = 0.8
    target_speed: float = 1.0
    max_steer: float = 0.41

    def __post_init__(self) -> None:
        if self.lookahead <= 0 or self.max_steer <= 0:
            raise ValueError("lookahead and max_steer must be > 0")


def lookahead_point(path: Path, x: float, y: float, ld: float, hint: int | None = None) -> LookaheadResult:
    """First forward crossing of the circle of radius ``ld`` around (x, y) with the path.

    The search starts at the nearest path point and walks forward along arc
    length, wrapping on closed paths. Falls back to the nearest point (flagged)
    when the car is farther than ``ld`` from the path or no crossing exists.
    """
    return _lookahead_from(path, x, y, ld, path.project(x, y, hint))


def _lookahead_from(path: Path, x: float, y: float, ld: float, near: Projection) -> LookaheadResult:
    if near.distance > ld:
        return LookaheadResult(near.x, near.y, near.segment, True)
    n = path.n_segments
    r2 = ld * ld
    for k in range(n + 1):
        i = near.segment + k
        if not path.closed and i >= n:
            break
        i %= n
        (x0, y0), (x1, y1) = path.segment(i)
        dx, dy = x1 - x0, y1 - y0
        fx, fy = x0 - x, y0 - y
        a = dx * dx + dy * dy
        b = 2 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - r2
        disc = b * b - 4 * a * c
        if disc < 0:
            continue
        root = math.sqrt(disc)
        u_min = near.t if k == 0 else 0.0
        u_max = near.t if k == n else 1.0
        for u in sorted(((-b - root) / (2 * a), (-b + root) / (2 * a))):
            if u_min <= u <= u_max:
                return LookaheadResult(x0 + u * dx, y0 + u * dy, i, False)
    if not path.closed:
        ex, ey = path.waypoints[-1]
        return LookaheadResult(ex, ey, n - 1, True)
    return LookaheadResult(near.x, near.y, near.segment, True)


def pure_pursuit_steer(state: BicycleState, tx: float, ty: float, max_steer: float = 0.41) -> SteerCommand:
    dx, dy = tx - state.x, ty - state.y
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        return SteerCommand(0.0, True)
    c, s = math.cos(state.theta), math.sin(state.theta)
    lateral = -s * dx + c * dy
    curvature = 2.0 * lateral / d2
    steer = math.atan(state.wheelbase * curvature)
    return SteerCommand(max(-max_steer, min(max_steer, steer)), False)


def bicycle_step(
    state: BicycleState,
    steer: float,
    dt: float,
    target_speed: float | None = None,
    time_constant: float = SPEED_TIME_CONSTANT_S,
) -> BicycleState:
    if not 0.0 < dt <= MAX_STEP_S:
        raise StepError(f"dt={dt} s outside (0, {MAX_STEP_S}]")
    x = state.x + state.v * math.cos(state.theta) * dt
    y = state.y + state.v * math.sin(state.theta) * dt
    theta = state.theta + state.v / state.wheelbase * math.tan(steer) * dt
    theta = math.atan2(math.sin(theta), math.cos(theta))
    v = state.v
    if target_speed is not None:
        v = target_speed + (state.v - target_speed) * math.exp(-dt / time_constant)
    return replace(state, x=x, y=y, theta=theta, v=max(0.0, v))


def build_oval(length: float, width: float, corner_radius: float, spacing: float) -> Path:
    """Closed rounded-rectangle loop centred on the origin, counter-clockwise.

    It starts at the middle of the bottom straight heading +x. With
    ``corner_radius == width / 2`` the loop is a stadium.
    """
    if min(length, width, corner_radius, spacing) <= 0:
        raise GeometryError("oval dimensions and spacing must be positive")
    if corner_radius > width / 2 or corner_radius > length / 2:
        raise GeometryError(f"corner radius {corner_radius} exceeds half of {width} x {length}")
    r = corner_radius
    hx, hy = length / 2 - r, width / 2 - r
    arc = math.pi * r / 2
    # (kind, length, params) in travel order
    pieces = [
        ("line", hx, (0.0, -width / 2, 1.0, 0.0)),
        ("arc", arc, (hx, -hy, -math.pi / 2)),
        ("line", 2 * hy, (length / 2, -hy, 0.0, 1.0)),
        ("arc", arc, (hx, hy, 0.0)),
        ("line", 2 * hx, (hx, width / 2, -1.0, 0.0)),
        ("arc", arc, (-hx, hy, math.pi / 2)),
        ("line", 2 * hy, (-length / 2, hy, 0.0, -1.0)),
        ("arc", arc, (-hx, -hy, math.pi)),
        ("line", hx, (-hx, -width / 2, 1.0, 0.0)),
    ]
    perimeter = sum(p[1] for p in pieces)
    n = max(3, round(perimeter / spacing))
    step = perimeter / n
    points = []
    for k in range(n):
        s = k * step
        for kind, seg_len, params in pieces:
            if s < seg_len:
                break
            s -= seg_len
        else:
            kind, seg_len, params = pieces[-1]
            s = min(s, seg_len)
        if kind == "line":
            x0, y0, ux, uy = params
            points.append((x0 + ux * s, y0 + uy * s))
        else:
            cx, cy, a0 = params
            a = a0 + s / r
            points.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return Path(tuple(points), closed=True)


def start_state(path: Path, s: float, speed: float, wheelbase: float = DEFAULT_WHEELBASE) -> BicycleState:
    """Bicycle state placed on the path at arc length ``s``, aligned with it."""
    x, y, heading = path.point_at(s)
    return BicycleState(x, y, heading, speed, wheelbase)


class PurePursuitController:
    """Stateful tracker that keeps a projection hint between steps."""

    def __init__(self, path: Path, config: PurePursuitConfig) -> None:
        self.path = path
        self.config = config
        self._hint: int | None = None
        self.last_lookahead: LookaheadResult | None = None

    def command(self, state: BicycleState) -> SteerCommand:
        near = self.path.project(state.x, state.y, self._hint, window=4)
        self._hint = near.segment
        la = _lookahead_from(self.path, state.x, state.y, self.config.lookahead, near)
        self.last_lookahead = la
        return pure_pursuit_steer(state, la.x, la.y, self.config.max_steer)

    def cross_track_error(self, state: BicycleState) -> float:
        return self.path.project(state.x, state.y, self._hint).distance
