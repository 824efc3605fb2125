"""Unicycle rover kinematics, pure-pursuit tracking and point turns."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .gnc import GncConfig, NavMode
from .path import Path, wrap_angle

HEADING_TOLERANCE = math.radians(0.5)


@dataclass(frozen=True)
class RoverState:
    position: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    speed: float = 0.0
    omega: float = 0.0
    mode: NavMode = NavMode.RAPID
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        if self.speed < 0:
            raise ValueError("speed must be >= 0")

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]


def step_kinematics(state: RoverState, v: float, omega: float, dt: float) -> RoverState:
    """Exact-arc unicycle update over ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    th = state.heading
    half = 0.5 * omega * dt
    # chord of the arc: length v dt sinc(half), direction th + half; stable as omega -> 0
    chord = v * dt * (math.sin(half) / half if abs(half) > 1e-12 else 1.0)
    x = state.x + chord * math.cos(th + half)
    y = state.y + chord * math.sin(th + half)
    return replace(state, position=(x, y), heading=th + omega * dt, speed=v, omega=omega, time=state.time + dt)


class PursuitCommand(NamedTuple):
    curvature: float
    complete: bool
    progress: float
    target: np.ndarray


def pure_pursuit(state: RoverState, path: Path, lookahead: float,
                 s_min: float | None = None, s_max: float | None = None) -> PursuitCommand:
    """Pure-pursuit curvature ``2 y / d^2`` toward the lookahead point.

    The lookahead point sits ``lookahead`` metres of arc beyond the rover's
    projection; past the path end it continues along the final heading so the
    command stays well-conditioned near the end.
    """
    if lookahead <= 0:
        raise ValueError("lookahead must be > 0")
    s0, _ = path.project(state.position, s_min, s_max)
    total = path.length
    target_s = s0 + lookahead
    if target_s <= total:
        target = path.point_at(target_s)
    else:
        h = path.heading_at(total)
        target = path.end + (target_s - total) * np.array([math.cos(h), math.sin(h)])
    dx, dy = target[0] - state.x, target[1] - state.y
    c, s = math.cos(state.heading), math.sin(state.heading)
    x_l = c * dx + s * dy
    y_l = -s * dx + c * dy
    ex, ey = path.end[0] - state.x, path.end[1] - state.y
    end_ahead = c * ex + s * ey
    if total == 0.0 or (s0 >= total - 1e-9 and end_ahead <= 1e-9):
        return PursuitCommand(0.0, True, s0, target)
    d2 = x_l * x_l + y_l * y_l
    return PursuitCommand(2.0 * y_l / d2, False, s0, target)


def point_turn_step(state: RoverState, target_heading: float, rate: float, dt: float) -> RoverState:
    """One fixed-length tick of in-place rotation toward ``target_heading``."""
    err = wrap_angle(target_heading - state.heading)
    omega = math.copysign(min(rate, abs(err) / dt), err) if err else 0.0
    return replace(state, heading=state.heading + omega * dt, speed=0.0, omega=omega, time=state.time + dt)


def execute_point_turn(state: RoverState, target_heading: float, cfg: GncConfig,
                       dt: float = 0.1) -> list[RoverState]:
    """States of an in-place turn at ``point_turn_rate``; the last step may be partial."""
    err = wrap_angle(target_heading - state.heading)
    if abs(err) < HEADING_TOLERANCE:
        return []
    rate = cfg.point_turn_rate
    sign = math.copysign(1.0, err)
    remaining = abs(err)
    out = []
    cur = state
    while remaining > 1e-12:
        step = min(dt, remaining / rate)
        cur = replace(cur, heading=cur.heading + sign * rate * step, speed=0.0,
                      omega=sign * rate, time=cur.time + step)
        remaining -= rate * step
        out.append(cur)
    out[-1] = replace(out[-1], heading=target_heading, omega=0.0)
    return out


def cross_track_distances(positions, path: Path) -> np.ndarray:
    """Exact distance from each position to the nearest point of ``path``."""
    poses = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(path) == 1:
        return np.hypot(*(poses - path.start).T)
    a = path.waypoints[:-1]
    d = path.waypoints[1:] - a
    seg2 = path.segment_lengths ** 2
    out = np.empty(len(poses))
    chunk = max(1, 2_000_000 // len(a))
    for i in range(0, len(poses), chunk):
        p = poses[i:i + chunk, None, :]
        t = np.clip(((p - a) * d).sum(axis=2) / seg2, 0.0, 1.0)
        foot = a + t[..., None] * d
        out[i:i + chunk] = np.hypot(*(foot - p).transpose(2, 0, 1)).min(axis=1)
    return out


def rms_cross_track(pose_log, path: Path) -> float:
    """RMS distance from logged positions to ``path``."""
    dist = cross_track_distances(pose_log, path)
    if len(dist) == 0:
        raise ValueError("pose log is empty")
    return float(np.sqrt(np.mean(dist**2)))
