import math

import numpy as np
import pytest

from roversim.courses import build_course, straight_course, winding_course
from roversim.errors import ValidationError
from roversim.path import vertex_curvature


def test_straight():
    p = straight_course((1.0, 2.0), 10.0, heading_deg=90.0)
    assert p.length == pytest.approx(10.0)
    assert p.end == pytest.approx([1.0, 12.0])


def test_winding_net_heading_and_curvature():
    p = winding_course((0.0, 0.0), lobes=6, kappa_range=(0.3, 0.5), lobe_turn_deg=60, seed=4)
    k = vertex_curvature(p.waypoints)
    # resampling at 0.25 m keeps the peak within a few percent of the drawn range
    assert np.abs(k).max() <= 0.5 * 1.05
    # half lobes at both ends: the heading swings about the base heading and returns to it
    h0 = p.heading_at(0.1)
    h1 = p.heading_at(p.length - 0.1)
    assert h0 == pytest.approx(0.0, abs=1e-6)
    assert abs(math.remainder(h1 - h0, 2 * math.pi)) < math.radians(2)


def test_winding_deterministic():
    a = winding_course((0, 0), seed=9)
    b = winding_course((0, 0), seed=9)
    assert np.array_equal(a.waypoints, b.waypoints)


def test_build_course_errors():
    with pytest.raises(ValidationError) as exc:
        build_course({"kind": "spiral"}, (0, 0))
    assert exc.value.path == "route.course.kind"
    with pytest.raises(ValidationError) as exc:
        build_course({"kind": "winding", "lobes": 0}, (0, 0))
    assert exc.value.path == "route.course.lobes"
    with pytest.raises(ValidationError):
        build_course({"kind": "straight", "length": 5, "wiggle": 1}, (0, 0))
