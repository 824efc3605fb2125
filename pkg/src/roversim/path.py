"""Polyline paths with arc-length parameterisation and discrete curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def vertex_curvature(points: np.ndarray) -> np.ndarray:
    """Signed turning-angle curvature at every vertex (zero at the ends).

    At interior vertex i the heading change between the incoming and outgoing
    segment is divided by the mean of the two segment lengths, which is exact
    for points sampled uniformly along a circular arc (up to chord/arc error).
    """
    n = len(points)
    kappa = np.zeros(n)
    if n < 3:
        return kappa
    d = np.diff(points, axis=0)
    seg_len = np.hypot(d[:, 0], d[:, 1])
    heading = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(heading)
    turn = (turn + np.pi) % (2.0 * np.pi) - np.pi
    kappa[1:-1] = turn / (0.5 * (seg_len[:-1] + seg_len[1:]))
    return kappa


@dataclass(frozen=True, eq=False)
class Path:
    """Ordered waypoints in metres with per-segment curvature in 1/m.

    ``curvature[i]`` belongs to segment i (waypoint i to i+1) and is the
    curvature of the vertex where that segment starts, so ``curvature[0]`` is 0.
    """

    waypoints: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 2 or len(self.waypoints) == 0:
            raise ValueError("waypoints must be a non-empty (N, 2) array")
        if len(self.curvature) != max(len(self.waypoints) - 1, 0):
            raise ValueError("curvature must have one entry per segment")
        if len(self.waypoints) > 1 and np.any(self.segment_lengths == 0.0):
            raise ValueError("consecutive waypoints must be distinct")
        if not np.all(np.isfinite(self.curvature)):
            raise ValueError("curvature must be finite")

    @classmethod
    def from_points(cls, points: Iterable, tol: float = 1e-9) -> Path:
        pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
        pts = pts.reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("path needs at least one waypoint")
        step = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
        pts = pts[np.concatenate([[True], step > tol])].copy()
        pts.setflags(write=False)
        kappa = vertex_curvature(pts)[:-1] if len(pts) > 1 else np.zeros(0)
        kappa.setflags(write=False)
        return cls(pts, kappa)

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        d = np.diff(self.waypoints, axis=0)
        out = np.hypot(d[:, 0], d[:, 1])
        out.setflags(write=False)
        return out

    @cached_property
    def arc_lengths(self) -> np.ndarray:
        """Cumulative arc length at each waypoint."""
        out = np.concatenate([[0.0], np.cumsum(self.segment_lengths)])
        out.setflags(write=False)
        return out

    @cached_property
    def length(self) -> float:
        return float(self.segment_lengths.sum()) if len(self.waypoints) > 1 else 0.0

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def __len__(self) -> int:
        return len(self.waypoints)

    def point_at(self, s: float) -> np.ndarray:
        if len(self.waypoints) == 1:
            return self.waypoints[0].copy()
        cum = self.arc_lengths
        s = min(max(s, 0.0), cum[-1])
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(self.waypoints) - 2)
        seg = cum[i + 1] - cum[i]
        f = (s - cum[i]) / seg
        return self.waypoints[i] + f * (self.waypoints[i + 1] - self.waypoints[i])

    def heading_at(self, s: float) -> float:
        if len(self.waypoints) == 1:
            return 0.0
        cum = self.arc_lengths
        s = min(max(s, 0.0), cum[-1])
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(max(i, 0), len(self.waypoints) - 2)
        d = self.waypoints[i + 1] - self.waypoints[i]
        return math.atan2(d[1], d[0])

    def project(self, p, s_min: float | None = None, s_max: float | None = None) -> tuple[float, float]:
        """Nearest point on the path to ``p``; returns (arc length, distance).

        ``s_min``/``s_max`` restrict the search window, which keeps projections
        from jumping between nearby loops of a winding path.
        """
        p = np.asarray(p, dtype=float)
        if len(self.waypoints) == 1:
            return 0.0, float(np.hypot(*(p - self.waypoints[0])))
        a = self.waypoints[:-1]
        d = self.waypoints[1:] - a
        seg = self.segment_lengths
        t = np.clip(((p - a) * d).sum(axis=1) / (seg * seg), 0.0, 1.0)
        cum = self.arc_lengths
        s_cand = cum[:-1] + t * seg
        if s_min is not None or s_max is not None:
            lo = -np.inf if s_min is None else s_min
            hi = np.inf if s_max is None else s_max
            s_cand = np.clip(s_cand, np.maximum(cum[:-1], lo), np.minimum(cum[1:], hi))
            valid = (cum[1:] >= lo) & (cum[:-1] <= hi)
            t = np.where(seg > 0, (s_cand - cum[:-1]) / seg, 0.0)
        else:
            valid = np.ones(len(seg), dtype=bool)
        foot = a + t[:, None] * d
        dist = np.hypot(foot[:, 0] - p[0], foot[:, 1] - p[1])
        dist = np.where(valid, dist, np.inf)
        k = int(np.argmin(dist))
        return float(s_cand[k]), float(dist[k])

    def sample(self, ds: float) -> tuple[np.ndarray, np.ndarray]:
        """Points every ``ds`` metres of arc length, always including the end."""
        total = self.length
        n = int(math.floor(total / ds + 1e-9))
        s = np.arange(n + 1) * ds
        if total - s[-1] > 1e-9:
            s = np.append(s, total)
        if len(self.waypoints) == 1:
            return s, np.repeat(self.waypoints[:1], len(s), axis=0)
        cum = self.arc_lengths
        x = np.interp(s, cum, self.waypoints[:, 0])
        y = np.interp(s, cum, self.waypoints[:, 1])
        return s, np.column_stack([x, y])

    def densify(self, ds: float) -> Path:
        """Split segments longer than ``ds`` while keeping every original vertex."""
        if len(self.waypoints) == 1:
            return self
        out = [self.waypoints[0]]
        for a, b, seg in zip(self.waypoints[:-1], self.waypoints[1:], self.segment_lengths):
            k = max(int(math.ceil(seg / ds - 1e-9)), 1)
            for j in range(1, k + 1):
                out.append(a + (b - a) * (j / k))
        return Path.from_points(np.array(out))

    def sub_path(self, s0: float, s1: float | None = None) -> Path:
        """The portion of the path between arc lengths ``s0`` and ``s1``."""
        cum = self.arc_lengths
        s1 = cum[-1] if s1 is None else min(s1, cum[-1])
        s0 = min(max(s0, 0.0), s1)
        inner = self.waypoints[(cum > s0) & (cum < s1)]
        pts = [self.point_at(s0), *inner, self.point_at(s1)]
        return Path.from_points(np.array(pts))
