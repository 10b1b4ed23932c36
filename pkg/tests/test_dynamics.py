import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmexp.dynamics import (
    AgentState,
    ControlAction,
    VehicleParams,
    check_collision,
    integrate,
    wrap_angle,
)
from swarmexp.mapcore import WorldMap

from conftest import random_world

PARAMS = VehicleParams()


class TestIntegrate:
    def test_straight_line(self):
        s = AgentState(0, 0, 0, speed=1.0)
        out = integrate(s, ControlAction(0.0, 0.0), PARAMS)
        assert out.x == pytest.approx(0.1)
        assert out.y == 0.0
        assert out.heading == 0.0
        assert out.speed == 1.0
        assert out.steering == 0.0

    def test_no_motion_at_zero_speed(self):
        s = AgentState(3.0, 4.0, 1.0, speed=0.0)
        out = integrate(s, ControlAction(0.0, 0.5), PARAMS)
        assert (out.x, out.y) == (3.0, 4.0)
        assert out.steering > 0.0  # steering still slews

    def test_rest_is_fixed_point(self):
        s = AgentState(1.0, 2.0, 0.3)
        out = integrate(s, ControlAction(0.0, 0.0), PARAMS)
        assert out == s

    def test_circle_matches_closed_form(self):
        # constant steering at fixed speed traces a circle of radius L/tan(d)
        params = VehicleParams(wheelbase=1.0, dt=0.01)
        delta = 0.2
        radius = params.wheelbase / math.tan(delta)
        s = AgentState(0.0, 0.0, 0.0, speed=1.0, steering=delta)
        action = ControlAction(0.0, delta)
        center = (0.0, radius)
        total_turn = 0.0
        worst = 0.0
        prev_heading = s.heading
        while total_turn < 2.0 * math.pi:
            s = integrate(s, action, params)
            total_turn += abs(wrap_angle(s.heading - prev_heading))
            prev_heading = s.heading
            r = math.hypot(s.x - center[0], s.y - center[1])
            worst = max(worst, abs(r - radius))
        assert worst < 0.01 * radius
        # and the trajectory closed the loop near the start
        assert math.hypot(s.x, s.y) < 0.05 * radius

    @given(
        speed=st.floats(-2, 2),
        steer=st.floats(-0.6, 0.6),
        accel=st.floats(-50, 50),
        target=st.floats(-50, 50),
    )
    @settings(max_examples=200, deadline=None)
    def test_limits_always_hold(self, speed, steer, accel, target):
        s = AgentState(0, 0, 0, speed=speed, steering=steer)
        out = integrate(s, ControlAction(accel, target), PARAMS)
        assert abs(out.speed) <= PARAMS.v_max
        assert abs(out.steering) <= PARAMS.steer_max
        assert -math.pi < out.heading <= math.pi

    def test_steering_slews_not_jumps(self):
        s = AgentState(0, 0, 0, speed=1.0, steering=0.0)
        out = integrate(s, ControlAction(0.0, 0.6), PARAMS)
        assert out.steering == pytest.approx(PARAMS.steer_rate_max * PARAMS.dt)

    def test_lipschitz_regression_bound(self):
        # frozen sensitivity bound: output moves at most K * eps for a state
        # perturbed by eps (measured once at K ~ 1.3, frozen with margin)
        K = 3.0
        eps = 1e-6
        rng = np.random.default_rng(5)
        for _ in range(50):
            base = AgentState(*rng.uniform(-1, 1, 2), rng.uniform(-3, 3),
                              rng.uniform(-2, 2), rng.uniform(-0.6, 0.6))
            action = ControlAction(rng.uniform(-2, 2), rng.uniform(-0.6, 0.6))
            out0 = np.array(astuple(integrate(base, action, PARAMS)))
            for dim in range(5):
                vals = list(astuple(base))
                vals[dim] += eps
                out1 = np.array(astuple(integrate(AgentState(*vals), action, PARAMS)))
                delta = out1 - out0
                delta[2] = wrap_angle(delta[2])
                assert np.linalg.norm(delta) <= K * eps


def astuple(s: AgentState):
    return (s.x, s.y, s.heading, s.speed, s.steering)


class TestCollision:
    def test_inside_footprint(self):
        m = WorldMap("c", 0.1, (0, 0, 10, 10), np.array([[5.0, 5.0]]),
                     np.array([[2.0, 2.0]]))
        assert check_collision(AgentState(2.0, 2.45, 0), m, PARAMS)

    def test_empty_map_no_collision(self):
        m = WorldMap("c", 0.1, (0, 0, 10, 10), np.array([[5.0, 5.0]]), np.empty((0, 2)))
        assert not check_collision(AgentState(2.0, 2.0, 0), m, PARAMS)

    def test_outside_bounds_collides(self):
        m = WorldMap("c", 0.1, (0, 0, 10, 10), np.array([[5.0, 5.0]]), np.empty((0, 2)))
        assert check_collision(AgentState(-0.1, 5.0, 0), m, PARAMS)
        assert check_collision(AgentState(5.0, 10.1, 0), m, PARAMS)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(21)
        m = random_world(rng, n_free=50, n_obst=200)
        fp2 = PARAMS.footprint_radius ** 2
        for _ in range(2000):
            x, y = rng.uniform(-2, 42, 2)
            got = check_collision(AgentState(x, y, 0), m, PARAMS)
            if not (0 <= x <= 40 and 0 <= y <= 40):
                want = True
            else:
                d = m.obstacle - [x, y]
                want = bool((d[:, 0] ** 2 + d[:, 1] ** 2 <= fp2).any())
            assert got == want
