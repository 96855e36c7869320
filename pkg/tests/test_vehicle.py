import math

import pytest
from hypothesis import given, strategies as st

from coopcar.errors import GeometryError, StepError
from coopcar.vehicle import (
    BicycleState,
    Path,
    PurePursuitConfig,
    PurePursuitController,
    bicycle_step,
    build_oval,
    lookahead_point,
    pure_pursuit_steer,
    start_state,
)

OVAL = build_oval(4.0, 2.5, 1.25, 0.1)
STRAIGHT = Path(((0.0, 0.0), (5.0, 0.0), (10.0, 0.0)), closed=False)


def test_steer_straight_ahead_is_zero():
    assert pure_pursuit_steer(BicycleState(0, 0, 0, 1), 2.0, 0.0).angle == 0.0


def test_steer_hand_construction():
    # target at lateral 1 m, distance 2 m
    cmd = pure_pursuit_steer(BicycleState(0, 0, 0, 1, 0.33), math.sqrt(3), 1.0)
    assert cmd.angle == pytest.approx(math.atan(0.165), abs=1e-12)
    assert cmd.angle == pytest.approx(0.1636, abs=1e-4)


def test_steer_antisymmetric_and_rotation_invariant():
    left = pure_pursuit_steer(BicycleState(0, 0, 0, 1), 1.5, 0.4).angle
    right = pure_pursuit_steer(BicycleState(0, 0, 0, 1), 1.5, -0.4).angle
    assert right == -left
    rotated = pure_pursuit_steer(BicycleState(0, 0, math.pi / 2, 1), -0.4, 1.5).angle
    assert rotated == pytest.approx(left)


def test_steer_zero_distance_flagged():
    cmd = pure_pursuit_steer(BicycleState(1, 1, 0, 1), 1.0, 1.0)
    assert cmd == (0.0, True)


def test_steer_clamped():
    assert pure_pursuit_steer(BicycleState(0, 0, 0, 1), 0.0, 0.1, max_steer=0.41).angle == 0.41


def test_step_straight():
    # dt 0.1 s exceeds the step limit, so take it as two 50 ms steps
    s = BicycleState(0, 0, 0, 1)
    for _ in range(2):
        s = bicycle_step(s, 0.0, 0.05)
    assert (s.x, s.y, s.theta, s.v) == pytest.approx((0.1, 0.0, 0.0, 1.0))


def test_step_zero_speed_only_lags():
    s = bicycle_step(BicycleState(1, 2, 0.5, 0.0), 0.3, 0.01, target_speed=1.0)
    assert (s.x, s.y, s.theta) == (1, 2, 0.5)
    assert s.v == pytest.approx(1 - math.exp(-0.01 / 0.3))


@pytest.mark.parametrize("dt", [0.0, -0.01, 0.051])
def test_step_dt_range(dt):
    with pytest.raises(StepError):
        bicycle_step(BicycleState(0, 0, 0, 1), 0.0, dt)


@pytest.mark.parametrize("steer", [0.1, 0.25, -0.4])
def test_constant_steer_closes_circle(steer):
    wb, v, dt = 0.33, 1.0, 0.001
    radius = wb / math.tan(abs(steer))
    period = 2 * math.pi * radius / v
    s = BicycleState(0.0, 0.0, 0.0, v, wb)
    cy = math.copysign(radius, steer)
    worst = 0.0
    for _ in range(round(period / dt)):
        s = bicycle_step(s, steer, dt)
        worst = max(worst, abs(math.hypot(s.x, s.y - cy) - radius))
    assert math.hypot(s.x, s.y) <= 0.01 * 2 * math.pi * radius
    assert worst <= 0.01 * radius


def test_speed_lag_never_from_steering():
    a = bicycle_step(BicycleState(0, 0, 0, 0.5), 0.0, 0.02, target_speed=1.0)
    b = bicycle_step(BicycleState(0, 0, 0, 0.5), 0.4, 0.02, target_speed=1.0)
    assert a.v == b.v


def test_oval_construction():
    pts = OVAL.waypoints
    gaps = [math.dist(a, b) for a, b in zip(pts, pts[1:] + pts[:1])]
    assert all(0.05 <= g <= 0.15 for g in gaps)
    assert math.dist(pts[0], pts[-1]) <= 0.1 + 1e-9
    analytic = 2 * (4.0 - 2.5) + 2 * math.pi * 1.25
    assert OVAL.length == pytest.approx(analytic, rel=0.01)
    assert pts[0] == pytest.approx((0.0, -1.25))


def test_oval_counter_clockwise():
    pts = OVAL.waypoints
    area2 = sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]))
    assert area2 > 0


@pytest.mark.parametrize("args", [(4.0, 2.5, 1.3, 0.1), (4.0, 0.0, 1.0, 0.1), (4.0, 2.5, 1.0, 0.0)])
def test_oval_geometry_errors(args):
    with pytest.raises(GeometryError):
        build_oval(*args)


def test_path_validation():
    with pytest.raises(GeometryError):
        Path(((0, 0), (1, 0)), closed=True)
    with pytest.raises(GeometryError):
        Path(((0, 0), (0, 0), (1, 1)))


def test_path_json_roundtrip():
    assert Path.from_json(OVAL.to_json()) == OVAL


def test_lookahead_on_straight():
    la = lookahead_point(STRAIGHT, 2.0, 0.0, 0.8)
    assert not la.fallback
    assert (la.x, la.y) == pytest.approx((2.8, 0.0))


def test_lookahead_fallback_when_far():
    la = lookahead_point(STRAIGHT, 3.0, 2.0, 0.8)
    assert la.fallback and (la.x, la.y) == pytest.approx((3.0, 0.0))


def _dense_oracle(path, x, y, ld, samples=20000):
    """Walk the path forward from the nearest sample; first point at distance >= ld."""
    pts = [path.point_at(path.length * k / samples)[:2] for k in range(samples)]
    start = min(range(samples), key=lambda k: math.dist(pts[k], (x, y)))
    for k in range(samples):
        p = pts[(start + k) % samples]
        if math.dist(p, (x, y)) >= ld:
            return p
    return None


@given(st.floats(0, 10.8), st.floats(-0.2, 0.2), st.floats(0.3, 1.5))
def test_lookahead_matches_dense_sampling(s, offset, ld):
    x, y, tangent = OVAL.point_at(s)
    x -= offset * math.sin(tangent)
    y += offset * math.cos(tangent)
    la = lookahead_point(OVAL, x, y, ld)
    assert not la.fallback
    d = math.dist((la.x, la.y), (x, y))
    assert 0.99 * ld <= d <= 1.01 * ld
    oracle = _dense_oracle(OVAL, x, y, ld, samples=4000)
    assert math.dist(oracle, (la.x, la.y)) < 0.05


def _drive(laps, dt=0.01, speed=1.0):
    ctl = PurePursuitController(OVAL, PurePursuitConfig(lookahead=0.8, target_speed=speed))
    s = start_state(OVAL, 0.0, speed)
    errors = []
    steps = round(laps * OVAL.length / speed / dt)
    for k in range(steps):
        cmd = ctl.command(s)
        assert abs(cmd.angle) <= ctl.config.max_steer
        s = bicycle_step(s, cmd.angle, dt, speed)
        errors.append((k * dt, ctl.cross_track_error(s)))
    return errors


def test_cross_track_after_first_lap():
    lap_s = OVAL.length
    errors = _drive(3)
    assert max(e for t, e in errors if t >= lap_s) < 0.2


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-math.pi, math.pi), st.floats(0.01, 2.0))
def test_steer_bounded(tx, ty, theta, max_steer):
    cmd = pure_pursuit_steer(BicycleState(0, 0, theta, 1), tx, ty, max_steer)
    assert abs(cmd.angle) <= max_steer
