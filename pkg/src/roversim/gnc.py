"""Guidance: navigation modes, speed scaling, grid planning and headline formulas."""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import binary_dilation, maximum_filter

from .errors import BoundsError, DomainError, UnreachableError, ValidationError
from .path import Path, vertex_curvature

TELEOP_SPEED_CAP = 1.2


class NavMode(str, enum.Enum):
    FASTER = "FASTER"
    RAPID = "RAPID"
    TELEOP = "TELEOP"
    SAFE_STOP = "SAFE_STOP"


@dataclass(frozen=True)
class GncConfig:
    v_cmd_faster: float = 0.7
    v_rapid: float = 0.1
    d_stop: float = 1.5
    d_slow: float = 10.0
    replan_hz: float = 2.0
    min_turn_radius: float = 2.0
    fod_staleness_timeout: float = 2.0
    a_max: float = 0.5
    point_turn_rate: float = 0.3
    # yaw rate the drive can sustain while translating; sets the speed-dependent turn radius
    max_yaw_rate: float = 0.4
    # hazards are grown by this radius before planning (rover half-width plus margin)
    clearance: float = 1.1
    proximity_cells: int = 2
    proximity_gain: float = 4.0
    lookahead_min: float = 1.5
    lookahead_gain: float = 2.0

    def __post_init__(self):
        if not 0 < self.d_stop < self.d_slow:
            raise ValidationError("d_stop", f"must satisfy 0 < d_stop < d_slow (got {self.d_stop}, {self.d_slow})")
        if not 0 < self.v_rapid < self.v_cmd_faster:
            raise ValidationError("v_rapid", "must satisfy 0 < v_rapid < v_cmd_faster")
        if not self.replan_hz > 0:
            raise ValidationError("replan_hz", "must be > 0")
        if not self.min_turn_radius > 0:
            raise ValidationError("min_turn_radius", "must be > 0")
        if self.fod_staleness_timeout < 0:
            raise ValidationError("fod_staleness_timeout", "must be >= 0")
        if not self.point_turn_rate > 0:
            raise ValidationError("point_turn_rate", "must be > 0")
        if not self.max_yaw_rate > 0:
            raise ValidationError("max_yaw_rate", "must be > 0")
        if not self.a_max > 0:
            raise ValidationError("a_max", "must be > 0")
        need = self.v_cmd_faster**2 / (2.0 * self.d_stop)
        if self.a_max < need - 1e-12:
            raise ValidationError(
                "a_max", f"must be >= v_cmd_faster^2 / (2 d_stop) = {need:.3f} m/s^2 so a stop fits inside d_stop"
            )
        if self.proximity_cells < 0:
            raise ValidationError("proximity_cells", "must be >= 0")
        if self.clearance < 0:
            raise ValidationError("clearance", "must be >= 0")

    def lookahead(self, speed: float) -> float:
        return max(self.lookahead_min, self.lookahead_gain * speed)

    def turn_radius(self, speed: float | None = None) -> float:
        """Smallest radius drivable without stopping, at ``speed`` if given."""
        if speed is None or speed <= 0:
            return self.min_turn_radius
        return max(self.min_turn_radius, speed / self.max_yaw_rate)


def reaction_time(d_detection: float, v_traverse: float) -> float:
    if v_traverse <= 0:
        raise DomainError("v_traverse must be > 0")
    if d_detection < 0:
        raise DomainError("d_detection must be >= 0")
    return d_detection / v_traverse


def improvement_ratio(new_value: float, baseline: float) -> float:
    """Relative improvement over ``baseline`` in percent."""
    if baseline <= 0:
        raise DomainError("baseline must be > 0")
    return (new_value - baseline) / baseline * 100.0


def stopping_distance(v: float, a_max: float) -> float:
    if a_max <= 0:
        raise DomainError("a_max must be > 0")
    if v < 0:
        raise DomainError("v must be >= 0")
    return v * v / (2.0 * a_max)


@dataclass(frozen=True)
class ModeInputs:
    fod_age: float
    nearest_hazard: float | None
    teleop_active: bool = False
    plan_ok: bool = True
    rover_speed: float = 0.0


def mode_transition(current: NavMode, inputs: ModeInputs, cfg: GncConfig) -> NavMode:
    if inputs.nearest_hazard is not None and inputs.nearest_hazard <= cfg.d_stop:
        return NavMode.SAFE_STOP
    if current is NavMode.SAFE_STOP:
        # recovery always passes through RAPID, and only once stationary
        return NavMode.SAFE_STOP if inputs.rover_speed > 1e-9 else NavMode.RAPID
    if inputs.teleop_active:
        return NavMode.TELEOP
    if inputs.fod_age > cfg.fod_staleness_timeout or not inputs.plan_ok:
        return NavMode.RAPID
    return NavMode.FASTER


def speed_command(mode: NavMode, nearest_hazard: float | None, cfg: GncConfig,
                  teleop_speed: float | None = None) -> float:
    if mode is NavMode.SAFE_STOP:
        return 0.0
    if mode is NavMode.RAPID:
        return cfg.v_rapid
    if mode is NavMode.TELEOP:
        return min(TELEOP_SPEED_CAP if teleop_speed is None else teleop_speed, TELEOP_SPEED_CAP)
    d = math.inf if nearest_hazard is None else nearest_hazard
    scale = min(max((d - cfg.d_stop) / (cfg.d_slow - cfg.d_stop), 0.0), 1.0)
    return cfg.v_cmd_faster * scale


def needs_point_turn(segment_curvature: float, cfg: GncConfig, speed: float | None = None) -> bool:
    """True when the curvature is tighter than the rover can drive.

    Without ``speed`` this is the geometric limit ``1 / min_turn_radius``; with a
    speed the yaw-rate limit may widen the radius further.
    """
    return abs(segment_curvature) > 1.0 / cfg.turn_radius(speed)


# ---------------------------------------------------------------------------
# planning


class GridRoute(NamedTuple):
    cells: list[tuple[int, int]]
    cost: float


def cost_field(tmap, cfg: GncConfig) -> tuple[np.ndarray, np.ndarray]:
    """Blocked mask and per-cell traversal cost multiplier for planning.

    Cells at or above the hazard threshold, grown by ``clearance``, are
    blocked; free cells within ``proximity_cells`` (Chebyshev) of a blocked
    cell cost ``1 + gain * p``.
    """
    prob = tmap.probability()
    blocked = tmap.hazard_mask()
    if cfg.clearance > 0 and blocked.any():
        r = int(math.floor(cfg.clearance / tmap.cell_size))
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
        disk = (yy * yy + xx * xx) * tmap.cell_size**2 <= cfg.clearance**2 + 1e-12
        blocked = binary_dilation(blocked, structure=disk)
    mult = np.ones_like(prob)
    if cfg.proximity_cells > 0 and blocked.any():
        near = maximum_filter(blocked, size=2 * cfg.proximity_cells + 1, mode="constant", cval=False)
        band = near & ~blocked
        mult[band] = 1.0 + cfg.proximity_gain * prob[band]
    return blocked, mult


_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def astar(blocked: np.ndarray, mult: np.ndarray, start: tuple[int, int], goal: tuple[int, int],
          cell_size: float = 1.0) -> GridRoute:
    """8-connected A* on (row, col) cells; diagonal moves may not cut blocked corners.

    Edge cost is the step length times the destination cell's multiplier. The
    start cell may itself be blocked (the rover can sit inside a marked cell).
    """
    ny, nx = blocked.shape
    if blocked[goal]:
        raise UnreachableError(f"goal cell {goal} is hazardous")
    blk = blocked.ravel().tolist()
    mlt = mult.ravel().tolist()
    diag = math.sqrt(2.0)
    gy, gx = goal
    s_idx = start[0] * nx + start[1]
    g_idx = gy * nx + gx
    best = {s_idx: 0.0}
    parent = {s_idx: -1}
    closed = set()
    tie = 0

    def h(iy, ix):
        dy, dx = abs(iy - gy), abs(ix - gx)
        return cell_size * ((dx + dy) + (diag - 2.0) * min(dx, dy))

    heap = [(h(*start), tie, s_idx)]
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == g_idx:
            break
        closed.add(cur)
        cy, cx = divmod(cur, nx)
        gcur = best[cur]
        for dy, dx in _MOVES:
            ny_, nx_ = cy + dy, cx + dx
            if not (0 <= ny_ < ny and 0 <= nx_ < nx):
                continue
            nb = ny_ * nx + nx_
            if blk[nb] or nb in closed:
                continue
            if dy and dx:
                if blk[cy * nx + nx_] or blk[ny_ * nx + cx]:
                    continue
                step = diag
            else:
                step = 1.0
            cand = gcur + step * cell_size * mlt[nb]
            if cand < best.get(nb, math.inf):
                best[nb] = cand
                parent[nb] = cur
                tie += 1
                heapq.heappush(heap, (cand + h(ny_, nx_), tie, nb))
    if g_idx not in best:
        raise UnreachableError(f"no traversable route from {start} to {goal}")
    cells = []
    cur = g_idx
    while cur != -1:
        cells.append(divmod(cur, nx))
        cur = parent[cur]
    cells.reverse()
    return GridRoute(cells, best[g_idx])


def plan_grid(tmap, start, goal, cfg: GncConfig) -> GridRoute:
    """Optimal grid route between two world positions over the map's cost field."""
    s_cell = tmap.cell_of(start)
    g_cell = tmap.cell_of(goal)
    if s_cell is None or g_cell is None:
        raise BoundsError("start and goal must lie inside the map")
    blocked, mult = cost_field(tmap, cfg)
    return astar(blocked, mult, s_cell, g_cell, tmap.cell_size)


def _segment_clear(tmap, blocked, mult, a, b, limit) -> bool:
    length = float(np.hypot(*(b - a)))
    n = max(int(math.ceil(length / (tmap.cell_size * 0.25))), 1)
    for k in range(n + 1):
        cell = tmap.cell_of(a + (b - a) * (k / n))
        if cell is None or blocked[cell] or mult[cell] > limit + 1e-12:
            return False
    return True


def _shortcut(tmap, blocked, mult, pts, cells) -> list[np.ndarray]:
    """Greedy string pulling that never moves closer to hazards than the grid route."""
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = i + 1
        limit = max(mult[cells[i]], mult[cells[j]])
        while j + 1 < len(pts):
            lim2 = max(limit, mult[cells[j + 1]])
            if not _segment_clear(tmap, blocked, mult, pts[i], pts[j + 1], lim2):
                break
            j += 1
            limit = lim2
        out.append(pts[j])
        i = j
    return out


def _fillet(tmap, blocked, mult, pts, radius, ds=0.25) -> list[np.ndarray]:
    """Round polyline corners with circular arcs of ``radius`` where they fit."""
    if len(pts) < 3:
        return list(pts)
    out = [pts[0]]
    for i in range(1, len(pts) - 1):
        a, v, b = pts[i - 1], pts[i], pts[i + 1]
        u_in = (v - a) / np.linalg.norm(v - a)
        u_out = (b - v) / np.linalg.norm(b - v)
        turn = math.atan2(u_in[0] * u_out[1] - u_in[1] * u_out[0], float(u_in @ u_out))
        if abs(turn) < 1e-6 or abs(turn) > math.radians(150):
            out.append(v)
            continue
        t = radius * math.tan(abs(turn) / 2.0)
        if t > 0.5 * min(np.linalg.norm(v - a), np.linalg.norm(b - v)):
            out.append(v)
            continue
        p_in = v - u_in * t
        normal = np.array([-u_in[1], u_in[0]]) * math.copysign(1.0, turn)
        center = p_in + normal * radius
        n = max(int(math.ceil(abs(turn) * radius / ds)), 1)
        start_ang = math.atan2(p_in[1] - center[1], p_in[0] - center[0])
        arc = [center + radius * np.array([math.cos(start_ang + turn * k / n), math.sin(start_ang + turn * k / n)])
               for k in range(n + 1)]
        limit = max(mult[c] for c in map(tmap.cell_of, (a, v, b)) if c is not None)
        if all(_segment_clear(tmap, blocked, mult, p, q, limit) for p, q in zip(arc[:-1], arc[1:])):
            out.extend(arc)
        else:
            out.append(v)
    out.append(pts[-1])
    return out


def _lead_point(tmap, blocked, mult, anchor, heading, length, backwards=False):
    """Point ``length`` along ``heading`` from ``anchor`` if the straight run to it is free."""
    if heading is None:
        return None
    u = np.array([math.cos(heading), math.sin(heading)])
    p = anchor - length * u if backwards else anchor + length * u
    a, b = (p, anchor) if backwards else (anchor, p)
    cell = tmap.cell_of(p)
    if cell is None or blocked[cell] or mult[cell] > 1.0:
        return None
    # the anchor cell itself may be marked; check only the free side
    for k in range(1, 9):
        q = a + (b - a) * (k / 8.0)
        c = tmap.cell_of(q)
        if c is None or blocked[c]:
            return None
    return p


def plan_path(tmap, start, goal, cfg: GncConfig, speed: float | None = None, ds: float = 0.25,
              start_heading: float | None = None, goal_heading: float | None = None) -> Path:
    """Plan a smoothed path from ``start`` to ``goal`` over the traversability map.

    The grid route is optimal for the cost field; it is then string-pulled and
    its corners are rounded at the drivable radius for ``speed`` where the free
    space allows. Optional headings add straight lead segments at either end so
    the path leaves and arrives tangentially. Remaining sharp corners become
    point turns downstream.
    """
    blocked, mult = cost_field(tmap, cfg)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    radius = 1.05 * cfg.turn_radius(speed)
    lead = 2.0 * radius
    post = _lead_point(tmap, blocked, mult, start, start_heading, lead)
    pre = _lead_point(tmap, blocked, mult, goal, goal_heading, lead, backwards=True)
    a = start if post is None else post
    b = goal if pre is None else pre
    if np.hypot(*(b - a)) < lead:
        post = pre = None
        a, b = start, goal
    route = plan_grid(tmap, a, b, cfg)
    pts = [tmap.cell_center(c) for c in route.cells]
    pts[0], pts[-1] = a, b
    pulled = _shortcut(tmap, blocked, mult, pts, route.cells)
    coarse = ([start] if post is not None else []) + [np.asarray(p) for p in pulled] \
        + ([goal] if pre is not None else [])
    rounded = _fillet(tmap, blocked, mult, coarse, radius, ds)
    return Path.from_points(np.array(rounded)).densify(ds)


def route_cost(route_cells, mult: np.ndarray, cell_size: float) -> float:
    """Cost of an explicit cell sequence under the planner's edge-cost rule."""
    total = 0.0
    for (y0, x0), (y1, x1) in zip(route_cells[:-1], route_cells[1:]):
        step = math.sqrt(2.0) if (y0 != y1 and x0 != x1) else 1.0
        total += step * cell_size * mult[y1, x1]
    return total


# ---------------------------------------------------------------------------
# point-turn decomposition


def split_at_point_turns(path: Path, cfg: GncConfig, speed: float | None = None) -> list[Path]:
    """Break a path into legs joined by in-place turns.

    Runs of vertices whose curvature is too tight to drive are collapsed onto
    the intersection of their entry and exit tangents (or onto the run's chord
    when the tangents do not meet ahead of the run), and the path is split there.
    """
    if len(path) < 3:
        return [path]
    pts = path.waypoints
    kappa = vertex_curvature(pts)
    tight = [i for i in range(1, len(pts) - 1) if needs_point_turn(kappa[i], cfg, speed)]
    if not tight:
        return [path]
    runs: list[list[int]] = []
    for i in tight:
        if runs and i - runs[-1][-1] <= 1:
            runs[-1].append(i)
        else:
            runs.append([i])

    new_pts: list[np.ndarray] = []
    corners: list[int] = []
    prev_end = 0
    for run in runs:
        a, b = run[0], run[-1]
        new_pts.extend(pts[prev_end:a])
        if a == b:
            corners.append(len(new_pts))
            new_pts.append(pts[a])
        else:
            h_in = pts[a] - pts[a - 1]
            h_out = pts[b + 1] - pts[b]
            cross = h_in[0] * h_out[1] - h_in[1] * h_out[0]
            corner = None
            if abs(cross) > 1e-9:
                rhs = pts[b] - pts[a]
                t1 = (rhs[0] * h_out[1] - rhs[1] * h_out[0]) / cross
                t2 = (rhs[0] * h_in[1] - rhs[1] * h_in[0]) / cross
                chord = float(np.hypot(*rhs))
                cand = pts[a] + t1 * h_in
                if t1 >= 0 and t2 <= 0 and np.hypot(*(cand - pts[a])) <= 2 * chord + 1e-9:
                    corner = cand
            if corner is not None:
                corners.append(len(new_pts))
                new_pts.append(corner)
            else:
                corners.append(len(new_pts))
                new_pts.append(pts[a])
                corners.append(len(new_pts))
                new_pts.append(pts[b])
        prev_end = b + 1
    new_pts.extend(pts[prev_end:])

    legs = []
    bounds = [0] + corners + [len(new_pts) - 1]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        leg = Path.from_points(np.array(new_pts[lo: hi + 1]))
        if leg.length > 1e-6:
            legs.append(leg)
    return legs or [path]
