"""Statistical far-obstacle detector.

Every publish cycle each obstacle inside range and field of view is reported
independently with probability ``reliability``; reports carry range/bearing
noise and a confidence drawn from Beta(8, 2). Spurious reports arrive as a
Poisson stream spread uniformly over the sensing sector with Beta(2, 5)
confidence, so a confidence threshold trades false positives against misses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TRUE_CONFIDENCE = (8.0, 2.0)
FALSE_CONFIDENCE = (2.0, 5.0)
FALSE_POSITIVE_RADIUS = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    max_range: float = 20.0
    reliability: float = 0.95
    publish_hz: float = 1.0
    confidence_threshold: float = 0.5
    range_noise_frac: float = 0.02
    bearing_noise: float = 1.0
    false_positive_rate: float = 0.05
    fov: float = 90.0

    def __post_init__(self):
        if not self.max_range > 0:
            raise ValidationError("max_range", "must be > 0")
        if not 0.0 <= self.reliability <= 1.0:
            raise ValidationError("reliability", "must lie in [0, 1]")
        if not 1.0 <= self.publish_hz <= 5.0:
            raise ValidationError("publish_hz", f"must lie in [1, 5] Hz (got {self.publish_hz})")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError("confidence_threshold", "must lie in [0, 1]")
        if self.range_noise_frac < 0:
            raise ValidationError("range_noise_frac", "must be >= 0")
        if self.bearing_noise < 0:
            raise ValidationError("bearing_noise", "must be >= 0")
        if self.false_positive_rate < 0:
            raise ValidationError("false_positive_rate", "must be >= 0")
        if not 0.0 < self.fov <= 360.0:
            raise ValidationError("fov", "must lie in (0, 360] degrees")


@dataclass(frozen=True)
class Detection:
    relative_position: tuple[float, float]
    confidence: float
    timestamp: float
    is_ground_truth_match: bool
    radius: float = FALSE_POSITIVE_RADIUS

    def to_record(self) -> dict:
        return {
            "rel": [self.relative_position[0], self.relative_position[1]],
            "confidence": self.confidence,
            "radius": self.radius,
            "match": self.is_ground_truth_match,
        }


def to_rover_frame(world_xy, rover) -> tuple[float, float]:
    dx = world_xy[0] - rover.position[0]
    dy = world_xy[1] - rover.position[1]
    c, s = math.cos(rover.heading), math.sin(rover.heading)
    return c * dx + s * dy, -s * dx + c * dy


def to_world_frame(det: Detection | tuple, rover) -> tuple[float, float]:
    """Rigid transform of a rover-frame point (x forward, y left) into the world."""
    x, y = det.relative_position if isinstance(det, Detection) else det
    c, s = math.cos(rover.heading), math.sin(rover.heading)
    return rover.position[0] + c * x - s * y, rover.position[1] + s * x + c * y


def visible_hazards(rover, world, cfg: DetectorConfig) -> list[tuple[int, float, float]]:
    """(hazard index, range, bearing) of every obstacle inside range and field of view."""
    out = []
    half_fov = math.radians(cfg.fov) / 2.0
    for i, hz in enumerate(world.hazards):
        if not hz.is_obstacle:
            continue
        rx, ry = to_rover_frame(hz.center, rover)
        rng_ = math.hypot(rx, ry)
        bearing = math.atan2(ry, rx)
        if rng_ <= cfg.max_range and abs(bearing) <= half_fov:
            out.append((i, rng_, bearing))
    return out


def sense(rover, world, cfg: DetectorConfig, rng: np.random.Generator) -> list[Detection]:
    """One publish cycle of detections in the rover frame."""
    dets = []
    cap = cfg.max_range * 1.1
    half_fov = math.radians(cfg.fov) / 2.0
    for i, r, b in visible_hazards(rover, world, cfg):
        if rng.random() >= cfg.reliability:
            continue
        r_obs = r + rng.normal(0.0, cfg.range_noise_frac * r) if cfg.range_noise_frac > 0 else r
        b_obs = b + math.radians(rng.normal(0.0, cfg.bearing_noise)) if cfg.bearing_noise > 0 else b
        r_obs = min(max(r_obs, 0.0), cap)
        conf = float(rng.beta(*TRUE_CONFIDENCE))
        dets.append(Detection((r_obs * math.cos(b_obs), r_obs * math.sin(b_obs)), conf, rover.time, True,
                              world.hazards[i].radius))
    n_false = rng.poisson(cfg.false_positive_rate) if cfg.false_positive_rate > 0 else 0
    for _ in range(n_false):
        r_fp = cfg.max_range * math.sqrt(rng.random())
        b_fp = rng.uniform(-half_fov, half_fov)
        conf = float(rng.beta(*FALSE_CONFIDENCE))
        dets.append(Detection((r_fp * math.cos(b_fp), r_fp * math.sin(b_fp)), conf, rover.time, False))
    return dets


def threshold_detections(dets, tau: float) -> list[Detection]:
    return [d for d in dets if d.confidence >= tau]
