import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roversim.errors import ValidationError
from roversim.perception import (Detection, DetectorConfig, sense, threshold_detections, to_rover_frame,
                                 to_world_frame, visible_hazards)
from roversim.rover import RoverState
from roversim.terrain import HazardSpec, TerrainParams, generate_terrain

CLEAN = dict(reliability=1.0, range_noise_frac=0.0, bearing_noise=0.0, false_positive_rate=0.0)


def _world(*hazards, size=120):
    return generate_terrain(TerrainParams(size_cells=size, amplitude=0.0), list(hazards))


def _boulder(x, y, r=0.5):
    return HazardSpec((x, y), r, 0.4, "Boulder")


class TestConfig:
    @pytest.mark.parametrize("hz", [0.5, 5.5, 7.0])
    def test_publish_hz_bounds(self, hz):
        with pytest.raises(ValidationError) as exc:
            DetectorConfig(publish_hz=hz)
        assert exc.value.path == "publish_hz"

    @pytest.mark.parametrize("field,value", [("max_range", 0.0), ("reliability", 1.2),
                                             ("confidence_threshold", -0.1), ("fov", 0.0)])
    def test_invalid(self, field, value):
        with pytest.raises(ValidationError):
            DetectorConfig(**{field: value})


class TestSense:
    def test_beyond_range_is_not_detected(self):
        world = _world(_boulder(30.0, 10.0))
        rover = RoverState((5.0, 10.0), 0.0)
        assert sense(rover, world, DetectorConfig(**CLEAN), np.random.default_rng(0)) == []

    def test_noise_free_dead_ahead(self):
        world = _world(_boulder(15.0, 10.0))
        rover = RoverState((5.0, 10.0), 0.0, time=3.0)
        dets = sense(rover, world, DetectorConfig(**CLEAN), np.random.default_rng(0))
        assert len(dets) == 1
        assert dets[0].relative_position == pytest.approx((10.0, 0.0), abs=1e-12)
        assert dets[0].is_ground_truth_match
        assert dets[0].timestamp == 3.0

    def test_outside_fov_is_not_detected(self):
        world = _world(_boulder(10.0, 20.0))
        rover = RoverState((10.0, 10.0), 0.0)
        assert visible_hazards(rover, world, DetectorConfig(**CLEAN)) == []
        assert len(visible_hazards(RoverState((10.0, 10.0), math.pi / 2), world, DetectorConfig(**CLEAN))) == 1

    def test_non_obstacles_are_invisible(self):
        world = _world(HazardSpec((15.0, 10.0), 1.0, 0.2, "Dune"))
        assert visible_hazards(RoverState((5.0, 10.0)), world, DetectorConfig(**CLEAN)) == []

    def test_reliability_monte_carlo(self):
        world = _world(_boulder(15.0, 10.0))
        rover = RoverState((5.0, 10.0), 0.0)
        cfg = DetectorConfig(reliability=0.95, false_positive_rate=0.0)
        rng = np.random.default_rng(123)
        n = 10_000
        hits = sum(any(d.is_ground_truth_match for d in sense(rover, world, cfg, rng)) for _ in range(n))
        assert 0.94 <= hits / n <= 0.96

    def test_deterministic_for_seed(self):
        world = _world(_boulder(15.0, 10.0), _boulder(18.0, 14.0))
        rover = RoverState((5.0, 10.0), 0.2)
        cfg = DetectorConfig(false_positive_rate=2.0)
        a = sense(rover, world, cfg, np.random.default_rng(5))
        b = sense(rover, world, cfg, np.random.default_rng(5))
        assert a == b

    def test_detections_inside_noise_allowance(self):
        world = _world(_boulder(24.0, 10.0))
        rover = RoverState((5.0, 10.0), 0.0)
        cfg = DetectorConfig(range_noise_frac=0.2, false_positive_rate=3.0)
        rng = np.random.default_rng(1)
        for _ in range(300):
            for d in sense(rover, world, cfg, rng):
                assert math.hypot(*d.relative_position) <= cfg.max_range * 1.1 + 1e-12
                assert 0.0 <= d.confidence <= 1.0

    def test_confidence_separation(self):
        world = _world(_boulder(15.0, 10.0))
        rover = RoverState((5.0, 10.0), 0.0)
        cfg = DetectorConfig(false_positive_rate=1.0)
        rng = np.random.default_rng(2)
        dets = [d for _ in range(3000) for d in sense(rover, world, cfg, rng)]
        true = [d for d in dets if d.is_ground_truth_match]
        false = [d for d in dets if not d.is_ground_truth_match]
        assert np.mean([d.confidence for d in true]) > np.mean([d.confidence for d in false])
        kept = threshold_detections(dets, 0.5)
        n_false_kept = sum(not d.is_ground_truth_match for d in kept)
        assert n_false_kept < len(false)
        assert any(d.is_ground_truth_match for d in kept)


def _det(c):
    return Detection((1.0, 0.0), c, 0.0, True)


class TestThreshold:
    def test_zero_keeps_all(self):
        dets = [_det(c) for c in (0.0, 0.3, 1.0)]
        assert threshold_detections(dets, 0.0) == dets

    def test_one_keeps_certain_only(self):
        assert [d.confidence for d in threshold_detections([_det(c) for c in (0.99, 1.0, 0.5)], 1.0)] == [1.0]

    @given(st.lists(st.floats(0.0, 1.0), max_size=30), st.floats(0.0, 1.0))
    def test_matches_linear_scan(self, confs, tau):
        dets = [_det(c) for c in confs]
        expect = []
        for d in dets:
            if d.confidence >= tau:
                expect.append(d)
        assert threshold_detections(dets, tau) == expect


class TestFrames:
    def test_identity_pose(self):
        assert to_world_frame(Detection((5.0, 0.0), 1.0, 0.0, True), RoverState()) == pytest.approx((5.0, 0.0))

    def test_quarter_turn(self):
        rover = RoverState((10.0, 0.0), math.pi / 2)
        assert to_world_frame((5.0, 0.0), rover) == pytest.approx((10.0, 5.0), abs=1e-12)

    @settings(max_examples=100)
    @given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-math.pi, math.pi),
           st.floats(-50, 50), st.floats(-50, 50))
    def test_round_trip(self, x, y, th, wx, wy):
        rover = RoverState((x, y), th)
        back = to_world_frame(to_rover_frame((wx, wy), rover), rover)
        assert math.hypot(back[0] - wx, back[1] - wy) < 1e-9
