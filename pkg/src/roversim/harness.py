"""Deterministic fixed-step simulation wiring terrain, perception, mapping, guidance and coordination."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .coord import Agent, CoordinationSim, Task, coverage_metric, partitioned_sweep
from .courses import build_course
from .errors import BoundsError, LogIntegrityError, UnreachableError, ValidationError
from .gnc import (ModeInputs, NavMode, cost_field, mode_transition, needs_point_turn, plan_path,
                  speed_command, split_at_point_turns)
from .path import Path, wrap_angle
from .perception import sense, threshold_detections, to_world_frame, visible_hazards
from .rover import HEADING_TOLERANCE, RoverState, point_turn_step, pure_pursuit, step_kinematics
from .scenario import Scenario, load_scenario, set_path
from .terrain import generate_terrain
from .travmap import FarTraversabilityMap, decay, fuse_detection, query_corridor

log = logging.getLogger(__name__)

# confidences are clipped away from 0 and 1 before entering log-odds
_P_EPS = 1e-6
# distance beyond a blocked stretch at which a detour may rejoin the course
_REJOIN_MARGIN = 3.0


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class EventLog:
    """Ordered JSON-lines records of one run."""

    def __init__(self, records=None):
        self.records: list[dict] = list(records or [])

    def append(self, rec: dict) -> None:
        self.records.append(_clean(rec))

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_type(self, kind: str) -> list[dict]:
        return [r for r in self.records if r.get("type") == kind]

    def to_text(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
                       for r in self.records)

    def to_bytes(self) -> bytes:
        return self.to_text().encode()

    def write(self, path) -> FsPath:
        path = FsPath(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path

    @classmethod
    def read(cls, path) -> EventLog:
        records = []
        for i, line in enumerate(FsPath(path).read_text().splitlines()):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise LogIntegrityError(f"line {i + 1} is not valid JSON: {exc.msg}") from None
        return cls(records)


def _concat(a: Path, b: Path | None) -> Path:
    if b is None:
        return a
    return Path.from_points(np.vstack([a.waypoints, b.waypoints[1:]]))


class Simulation:
    """One scenario run. Use :func:`run` rather than driving this directly."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.log = EventLog()
        self.world = generate_terrain(scenario.terrain, scenario.hazards)
        sensor_seed, bus_seed = np.random.SeedSequence(scenario.sim.seed).spawn(2)
        self.sensor_rng = np.random.default_rng(sensor_seed)
        self.bus_rng = np.random.default_rng(bus_seed)
        m = scenario.map
        self.map = FarTraversabilityMap.for_terrain(self.world, hazard_prob_threshold=m.hazard_prob_threshold,
                                                    l_min=m.l_min, l_max=m.l_max)
        self.v_nom = scenario.nominal_speed
        self.coord = None
        if scenario.coordination is not None and scenario.coordination.agents:
            c = scenario.coordination
            agents = [Agent(a["id"], a["role"], tuple(a.get("position", (0.0, 0.0))),
                            a.get("status", "Nominal"), float(a.get("speed", 0.5))) for a in c.agents]
            self.coord = CoordinationSim(agents, c.bus, self.bus_rng, proc_delay=c.proc_delay,
                                         ack_timeout=c.ack_timeout, hold_time=c.hold_time,
                                         retransmit=c.retransmit, retransmit_timeout=c.retransmit_timeout,
                                         max_retries=c.max_retries, emit=self.log.append)
            for f in c.fall_schedule:
                self.coord.schedule_fall(float(f["time"]), f["agent"])
            if c.tasks:
                self.coord.start_tasks([Task(t["id"], tuple(t["position"]), float(t["duration"]))
                                        for t in c.tasks])

    # -- route ------------------------------------------------------------
    def _initial_route(self) -> tuple[Path, Path | None]:
        r = self.sc.route
        heading = r.start_heading
        if r.course is not None:
            ref = build_course(r.course, r.start, heading)
        elif r.waypoints is not None:
            ref = Path.from_points(r.waypoints).densify(0.25)
        else:
            ref = None
        if ref is not None:
            w, h = self.world.extent
            lo, hi = ref.waypoints.min(axis=0), ref.waypoints.max(axis=0)
            if lo[0] < 0 or lo[1] < 0 or hi[0] > w or hi[1] > h:
                raise ValidationError("route", f"course leaves the terrain extent {w} x {h} m")
            return ref, ref
        return plan_path(self.map, r.start, r.goal, self.sc.gnc, self.v_nom), None

    def _set_path(self, path: Path) -> None:
        self.path = path
        self.legs = split_at_point_turns(path, self.sc.gnc, self.v_nom)
        self.leg_idx = 0
        self.leg_s = 0.0
        self.leg_offsets = np.concatenate([[0.0], np.cumsum([leg.length for leg in self.legs])])

    def _remaining(self) -> Path | None:
        """Remaining drivable route within the perception horizon."""
        if self.leg_idx >= len(self.legs):
            return None
        s0 = self.leg_offsets[self.leg_idx] + self.leg_s
        horizon = self.sc.detector.max_range + self.sc.gnc.d_slow
        pts = []
        for k in range(self.leg_idx, len(self.legs)):
            leg = self.legs[k]
            a = self.leg_s if k == self.leg_idx else 0.0
            b = min(leg.length, s0 + horizon - self.leg_offsets[k])
            if b <= a:
                break
            seg = leg.sub_path(a, b).waypoints
            pts.append(seg if not pts else seg[1:])
        if not pts:
            return None
        pts = np.vstack(pts)
        return Path.from_points(np.vstack([self.state.position, pts]))

    def _hazard_ahead(self, remaining: Path | None) -> float | None:
        """Arc distance along the remaining route to the first corridor hazard."""
        if remaining is None or remaining.length == 0:
            return None
        return query_corridor(self.map, remaining, self.sc.map.corridor_half_width)

    def _replan(self, t: float) -> None:
        remaining = self._remaining()
        hit = self._hazard_ahead(remaining)
        if hit is None and self.plan_ok:
            return
        gnc = self.sc.gnc
        pos = np.asarray(self.state.position)
        tail = None
        goal_heading = None
        if self.reference is None:
            target = np.asarray(self.sc.route.goal)
        else:
            ref = self.reference
            s_ref = self.s_ref
            blocked, mult = cost_field(self.map, gnc)
            lead = 2.0 * 1.05 * gnc.turn_radius(self.v_nom)
            # rejoin far enough downstream for a shallow return leg
            start = s_ref + (hit if hit is not None else 0.0) + 2.0 * lead + _REJOIN_MARGIN
            target = ref.end
            _, pts = ref.sample(self.map.cell_size)
            free = np.array([c is not None and not blocked[c] and mult[c] <= 1.0
                             for c in map(self.map.cell_of, pts)])
            step = self.map.cell_size
            back = int(math.ceil(lead / step))
            ahead = int(math.ceil(_REJOIN_MARGIN / step))
            for i in range(int(math.ceil(start / step)), len(pts)):
                if free[max(i - back, 0):i + ahead + 1].all():
                    s_r = i * step
                    target = pts[i]
                    goal_heading = ref.heading_at(s_r)
                    tail = ref.sub_path(s_r) if s_r < ref.length - 1e-9 else None
                    break
        try:
            detour = plan_path(self.map, pos, target, gnc, self.v_nom,
                               start_heading=self.state.heading, goal_heading=goal_heading)
        except (UnreachableError, BoundsError) as exc:
            if self.plan_ok:
                self.log.append({"t": t, "type": "plan", "action": "fail", "reason": str(exc)})
            self.plan_ok = False
            return
        self._set_path(_concat(detour, tail))
        self.plan_ok = True
        self.log.append({"t": t, "type": "plan", "action": "replan", "length": self.path.length,
                         "legs": len(self.legs), "hazard_at": hit})

    # -- loop -------------------------------------------------------------
    def run(self) -> EventLog:
        sc = self.sc
        dt = sc.sim.dt
        n_max = int(round(sc.sim.max_time / dt))
        header = {"type": "header", "version": __version__, "scenario": sc.document, "dt": dt,
                  "commanded_speed": self.v_nom,
                  "hazards": [[h.center[0], h.center[1], h.radius, h.kind.value, h.is_obstacle]
                              for h in self.world.hazards]}
        if sc.route is None:
            self.log.append(header)
            ticks = 0
            reason = "coordination"
            if self.coord is not None:
                self.coord.run_until(sc.sim.max_time)
        else:
            ticks, reason = self._drive(header, dt, n_max)
        if self.coord is not None and sc.route is not None:
            self.coord.run_until(ticks * dt)
        self._coverage()
        end = {"type": "end", "t": ticks * dt, "ticks": ticks, "reason": reason}
        if self.coord is not None:
            end["coordination"] = {"timeouts": self.coord.timeouts, "missed_alerts": self.coord.missed_alerts,
                                   "falls": len(self.coord.falls), "tasks": len(self.coord.tasks),
                                   "completed": len(self.coord.completed), "sent": self.coord.bus.sent,
                                   "dropped": self.coord.bus.dropped}
        self.log.append(end)
        return self.log

    def _coverage(self) -> None:
        c = self.sc.coordination
        if c is None or c.coverage is None:
            return
        cv = c.coverage
        multi = partitioned_sweep(self.world, cv.agents, cv.duration, cv.speed, cv.spacing)
        # same mission duration for the lone agent
        single = partitioned_sweep(self.world, 1, cv.duration, cv.speed, cv.spacing)
        c_multi = coverage_metric(multi, self.world, cv.sensor_radius)
        c_single = coverage_metric(single, self.world, cv.sensor_radius)
        self.log.append({"type": "coverage", "t": 0.0, "agents": cv.agents, "multi": c_multi,
                         "single": c_single, "ratio": c_multi / c_single if c_single > 0 else None})

    def _drive(self, header: dict, dt: float, n_max: int) -> tuple[int, str]:
        sc = self.sc
        gnc, det, op = sc.gnc, sc.detector, sc.operation
        path, self.reference = self._initial_route()
        self.s_ref = 0.0
        self.plan_ok = True
        self._set_path(path)
        start = self.path.start
        heading = sc.route.start_heading
        heading = self.path.heading_at(0.0) if heading is None else math.radians(heading)
        self.state = RoverState(tuple(start), heading, 0.0, 0.0, NavMode.RAPID, 0.0)
        header["initial_pose"] = [float(start[0]), float(start[1]), self.state.heading]
        self.log.append(header)
        self.log.append({"t": 0.0, "type": "plan", "action": "initial", "length": self.path.length,
                         "legs": len(self.legs)})

        uses_fod = op.policy != "baseline"
        teleop = op.policy == "teleop"
        publish_every = max(int(round(1.0 / (det.publish_hz * dt))), 1)
        replan_every = max(int(round(1.0 / (gnc.replan_hz * dt))), 1)
        fod_last = -math.inf
        turning_to: float | None = None
        smpa_odometer = 0.0
        pause_until = -math.inf
        mode = NavMode.RAPID
        reason = "max_time"
        rate = gnc.point_turn_rate

        for k in range(n_max):
            t = k * dt
            if self.coord is not None:
                self.coord.run_until(t)

            if k % publish_every == 0 and not any(a <= t < b for a, b in op.fod_outages):
                vis = len(visible_hazards(self.state, self.world, det))
                dets = sense(self.state, self.world, det, self.sensor_rng)
                kept = threshold_detections(dets, det.confidence_threshold)
                recs = []
                for d in dets:
                    wx, wy = to_world_frame(d, self.state)
                    rec = d.to_record()
                    rec["world"] = [wx, wy]
                    rec["kept"] = d.confidence >= det.confidence_threshold
                    recs.append(rec)
                for d in kept:
                    p = min(max(d.confidence, _P_EPS), 1.0 - _P_EPS)
                    fuse_detection(self.map, to_world_frame(d, self.state), p, d.radius)
                self.log.append({"t": t, "type": "sense", "visible": vis, "detections": recs})
                if uses_fod:
                    fod_last = t

            decay(self.map, dt, sc.map.decay_rate)

            if k % replan_every == 0 and turning_to is None:
                self._replan(t)

            nearest = self._hazard_ahead(self._remaining())
            new_mode = mode_transition(mode, ModeInputs(t - fod_last, nearest, teleop, self.plan_ok,
                                                        self.state.speed), gnc)
            if new_mode is not mode:
                self.log.append({"t": t, "type": "mode", "from": mode.value, "to": new_mode.value,
                                 "nearest": nearest})
                mode = new_mode
            v_cmd = speed_command(mode, nearest, gnc, op.teleop_speed if teleop else None)
            if op.policy == "baseline":
                if t < pause_until:
                    v_cmd = 0.0
                elif smpa_odometer >= op.smpa_interval:
                    smpa_odometer = 0.0
                    pause_until = t + op.smpa_pause
                    self.log.append({"t": t, "type": "smpa_pause", "until": pause_until})
                    v_cmd = 0.0 if op.smpa_pause > 0 else v_cmd

            prev = self.state.position
            turning = False
            done = False
            if turning_to is not None:
                turning = True
                if mode is NavMode.SAFE_STOP:
                    self.state = step_kinematics(self.state, 0.0, 0.0, dt)
                else:
                    self.state = point_turn_step(self.state, turning_to, rate, dt)
                    if abs(wrap_angle(turning_to - self.state.heading)) < HEADING_TOLERANCE:
                        turning_to = None
            else:
                leg = self.legs[self.leg_idx]
                v = max(self.state.speed - gnc.a_max * dt, 0.0) if mode is NavMode.SAFE_STOP else v_cmd
                cmd = pure_pursuit(self.state, leg, gnc.lookahead(max(v, v_cmd)),
                                   self.leg_s - 1.0, self.leg_s + gnc.lookahead(max(v, v_cmd)) + 1.0)
                self.leg_s = max(self.leg_s, cmd.progress)
                if cmd.complete or leg.length - self.leg_s <= 0.5 * max(v, 1e-3) * dt:
                    if self.leg_idx + 1 < len(self.legs):
                        self.leg_idx += 1
                        self.leg_s = 0.0
                        target = self.legs[self.leg_idx].heading_at(0.0)
                        if abs(wrap_angle(target - self.state.heading)) >= HEADING_TOLERANCE:
                            turning_to = target
                    else:
                        done = True
                    if turning_to is not None:
                        turning = True
                        self._log_turn(t, turning_to, "corner")
                        self.state = point_turn_step(self.state, turning_to, rate, dt)
                    else:
                        self.state = step_kinematics(self.state, 0.0, 0.0, dt)
                elif v > 0 and needs_point_turn(cmd.curvature, gnc, v_cmd if v_cmd > 0 else None):
                    turning_to = math.atan2(cmd.target[1] - self.state.y, cmd.target[0] - self.state.x)
                    turning = True
                    self._log_turn(t, turning_to, "tracking")
                    self.state = point_turn_step(self.state, turning_to, rate, dt)
                else:
                    self.state = step_kinematics(self.state, v, v * cmd.curvature, dt)
            self.state = RoverState(self.state.position, self.state.heading, self.state.speed,
                                    self.state.omega, mode, (k + 1) * dt)
            moved = math.hypot(self.state.x - prev[0], self.state.y - prev[1])
            if self.reference is not None:
                self.s_ref = self.reference.project(self.state.position, self.s_ref - 2.0, self.s_ref + 5.0)[0]
            smpa_odometer += moved
            xte = self.path.project(self.state.position)[1] if not done else 0.0
            self.log.append({"t": (k + 1) * dt, "type": "state", "x": self.state.x, "y": self.state.y,
                             "heading": self.state.heading, "v": self.state.speed, "omega": self.state.omega,
                             "mode": mode.value, "cmd": v_cmd, "turning": turning, "xte": xte})
            if done:
                reason = "goal"
                return k + 1, reason
        return n_max, reason

    def _log_turn(self, t: float, target: float, cause: str) -> None:
        self.log.append({"t": t, "type": "point_turn", "cause": cause, "from": self.state.heading,
                         "to": target, "angle": abs(wrap_angle(target - self.state.heading))})


def run(scenario: Scenario | dict | str):
    """Execute a scenario; returns ``(EventLog, MetricsReport)``."""
    from .metrics import compute_metrics

    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    sim = Simulation(scenario)
    try:
        events = sim.run()
    except Exception:
        tail = sim.log.to_text().splitlines()[-5:]
        log.error("run %r aborted; last records:\n%s", scenario.name, "\n".join(tail))
        raise
    return events, compute_metrics(events, scenario)


# ---------------------------------------------------------------------------
# sweeps

SEED_POLICIES = ("same", "per-value")


@dataclass
class SweepResult:
    axis: str
    values: list
    seed_policy: str
    reports: list = field(default_factory=list)
    seeds: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = [r.flat() for r in self.reports]
        keys = list(rows[0]) if rows else []
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.axis, "seed", "seed_policy", *keys])
        for v, s, row in zip(self.values, self.seeds, rows):
            w.writerow([json.dumps(v), s, self.seed_policy, *(row[k] for k in keys)])
        return buf.getvalue()


def _sweep_one(doc: dict):
    return run(load_scenario(doc))[1]


def sweep(base: Scenario | dict, axis: str, values, seed_policy: str = "same", jobs: int = 1) -> SweepResult:
    """One run per value of the dotted parameter ``axis``; results keep input order."""
    if seed_policy not in SEED_POLICIES:
        raise ValidationError("seed_policy", f"must be one of {SEED_POLICIES}")
    base_doc = base.document if isinstance(base, Scenario) else load_scenario(base).document
    head = axis.split(".")[0]
    if head not in base_doc and head not in ("route", "coordination"):
        raise ValidationError(axis, "unknown parameter path")
    seed0 = base_doc["sim"]["seed"]
    docs, seeds = [], []
    for i, v in enumerate(values):
        doc = set_path(base_doc, axis, v)
        seed = seed0 if seed_policy == "same" else seed0 + i
        doc["sim"]["seed"] = seed
        load_scenario(doc)  # validate every point before running any
        docs.append(doc)
        seeds.append(seed)
    if jobs > 1 and len(docs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_sweep_one, docs))
    else:
        reports = [_sweep_one(d) for d in docs]
    return SweepResult(axis, list(values), seed_policy, reports, seeds)
