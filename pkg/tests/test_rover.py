import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roversim.gnc import GncConfig
from roversim.path import Path
from roversim.rover import RoverState, execute_point_turn, pure_pursuit, rms_cross_track, step_kinematics

CFG = GncConfig()


class TestKinematics:
    def test_stationary(self):
        s = step_kinematics(RoverState((1.0, 2.0), 0.3), 0.0, 0.0, 0.1)
        assert s.position == (1.0, 2.0) and s.heading == pytest.approx(0.3) and s.time == pytest.approx(0.1)

    def test_straight(self):
        s = step_kinematics(RoverState(), 1.0, 0.0, 1.0)
        assert s.position == pytest.approx((1.0, 0.0))

    def test_full_circle(self):
        s = RoverState()
        n = 1000
        dt = 4 * math.pi / n
        for _ in range(n):
            s = step_kinematics(s, 1.0, 0.5, dt)
        assert math.hypot(*s.position) < 1e-6

    @given(st.floats(0.0, 2.0), st.floats(-1.0, 1.0), st.floats(0.01, 1.0), st.floats(-math.pi, math.pi))
    def test_arc_oracle(self, v, w, dt, th):
        s = step_kinematics(RoverState((0.0, 0.0), th), v, w, dt)
        if abs(w) < 1e-3:
            # second-order Taylor expansion of the circular motion
            ex = v * dt * math.cos(th) - 0.5 * v * w * dt * dt * math.sin(th)
            ey = v * dt * math.sin(th) + 0.5 * v * w * dt * dt * math.cos(th)
            tol = v * (abs(w) * dt) ** 2 * dt
        else:
            # rotate about the instantaneous centre of curvature
            r = v / w
            cx, cy = -r * math.sin(th), r * math.cos(th)
            a = w * dt
            ex = cx + math.cos(a) * (0 - cx) - math.sin(a) * (0 - cy)
            ey = cy + math.sin(a) * (0 - cx) + math.cos(a) * (0 - cy)
            tol = 1e-9
        assert math.hypot(s.x - ex, s.y - ey) <= tol + 1e-12
        assert math.cos(s.heading - th - w * dt) == pytest.approx(1.0)

    def test_step_length_is_arc_length(self):
        s0 = RoverState((2.0, 1.0), 0.4)
        fine = s0
        travelled = 0.0
        for _ in range(1000):
            nxt = step_kinematics(fine, 0.8, 0.3, 0.001)
            travelled += math.hypot(nxt.x - fine.x, nxt.y - fine.y)
            fine = nxt
        coarse = step_kinematics(s0, 0.8, 0.3, 1.0)
        assert travelled == pytest.approx(0.8, abs=1e-7)
        assert math.hypot(coarse.x - fine.x, coarse.y - fine.y) < 1e-9

    def test_heading_normalised(self):
        s = RoverState((0, 0), 3 * math.pi)
        assert -math.pi < s.heading <= math.pi

    def test_rejects_negative_speed(self):
        with pytest.raises(ValueError):
            RoverState(speed=-0.1)


class TestPursuit:
    def test_aligned(self):
        path = Path.from_points([(0, 0), (20, 0)])
        assert pure_pursuit(RoverState(), path, 5.0).curvature == pytest.approx(0.0)

    def test_closed_form(self):
        # lookahead point sits at (sqrt(24), 1) in the rover frame: d = 5
        path = Path.from_points([(-10, 1), (20, 1)])
        rover = RoverState((0.0, 0.0), 0.0)
        cmd = pure_pursuit(rover, path, math.sqrt(24))
        assert cmd.curvature == pytest.approx(2 * 1 / 25)

    def test_sign_matches_offset(self):
        rng = np.random.default_rng(0)
        path = Path.from_points([(-50, 0), (50, 0)])
        for _ in range(1000):
            y = rng.uniform(-3, 3)
            if abs(y) < 1e-3:
                continue
            cmd = pure_pursuit(RoverState((rng.uniform(-20, 20), y), 0.0), path, rng.uniform(1, 5))
            assert math.copysign(1.0, cmd.curvature) == -math.copysign(1.0, y)

    def test_past_end(self):
        path = Path.from_points([(0, 0), (5, 0)])
        cmd = pure_pursuit(RoverState((6.0, 0.0), 0.0), path, 2.0)
        assert cmd.complete and cmd.curvature == 0.0

    @pytest.mark.parametrize("offset", [-1.0, -0.4, 0.3, 1.0])
    def test_convergence(self, offset):
        path = Path.from_points([(0, 0), (60, 0)])
        s = RoverState((0.0, offset), 0.0)
        v, dt = 0.7, 0.1
        look = CFG.lookahead(v)
        errs, signed = [], []
        while True:
            cmd = pure_pursuit(s, path, look)
            if cmd.complete:
                break
            s = step_kinematics(s, v, v * cmd.curvature, dt)
            errs.append(abs(s.y))
            signed.append(s.y)
        first = int(look / (v * dt))
        err = np.array(errs)
        signed_start = math.copysign(1.0, offset)
        ys = np.array(signed)
        cross = np.flatnonzero(np.sign(ys) != signed_start)
        approach = err[first:cross[0]] if len(cross) else err[first:]
        # pure pursuit is linearly underdamped (damping ratio 1/sqrt(2)): monotone until the
        # first crossing, then a bounded overshoot of about exp(-pi) of the initial offset
        assert np.all(np.diff(approach) <= 1e-12)
        if len(cross):
            assert err[cross[0]:].max() <= 0.05 * abs(offset)
        settle = int(len(errs) * 0.5)
        assert math.sqrt(np.mean(np.square(errs[settle:]))) < 0.05

    def test_circle_tracking(self):
        th = np.linspace(0, 1.5 * math.pi, 400)
        path = Path.from_points(np.column_stack([3.0 * np.sin(th), 3.0 * (1 - np.cos(th))]))
        s = RoverState((0.0, 0.0), 0.0)
        v = 0.7
        poses = []
        for _ in range(2000):
            cmd = pure_pursuit(s, path, CFG.lookahead(v))
            if cmd.complete:
                break
            s = step_kinematics(s, v, v * cmd.curvature, 0.1)
            poses.append(s.position)
        assert rms_cross_track(poses, path) < 0.3


class TestPointTurn:
    def test_zero(self):
        assert execute_point_turn(RoverState(), 0.0, CFG) == []

    def test_quarter_turn_duration(self):
        start = RoverState((3.0, 4.0), 0.0, time=1.0)
        seq = execute_point_turn(start, math.pi / 2, CFG)
        assert seq[-1].time - start.time == pytest.approx((math.pi / 2) / 0.3)
        assert seq[-1].time - start.time == pytest.approx(5.236, abs=1e-3)
        assert seq[-1].heading == pytest.approx(math.pi / 2)
        assert all(st_.speed == 0.0 for st_ in seq)

    @settings(max_examples=50)
    @given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
    def test_in_place(self, h0, h1):
        start = RoverState((1.5, -2.5), h0)
        seq = execute_point_turn(start, h1, CFG)
        for s in seq:
            assert math.hypot(s.x - 1.5, s.y + 2.5) <= 1e-12
        if seq:
            err = abs(math.remainder(seq[-1].heading - h1, 2 * math.pi))
            assert err < math.radians(0.5)

    def test_shortest_direction(self):
        seq = execute_point_turn(RoverState(heading=math.radians(170)), math.radians(-170), CFG)
        assert seq[0].omega > 0
        assert seq[-1].time == pytest.approx(math.radians(20) / 0.3)


class TestRms:
    def test_on_path(self):
        path = Path.from_points([(0, 0), (10, 0)])
        assert rms_cross_track([(x, 0.0) for x in np.linspace(0, 10, 30)], path) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        path = Path.from_points([(0, 0), (10, 0)])
        assert rms_cross_track([(x, 0.2) for x in np.linspace(1, 9, 30)], path) == pytest.approx(0.2, abs=1e-9)

    def test_mixed(self):
        path = Path.from_points([(0, 0), (10, 0)])
        assert rms_cross_track([(2, 0.0), (5, 0.3), (8, -0.4)], path) == pytest.approx(math.sqrt(0.25 / 3), abs=1e-9)
