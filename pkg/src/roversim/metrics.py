"""Run metrics computed from an event log."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coord import measure_task_completion
from .errors import DomainError, LogIntegrityError
from .gnc import NavMode

# fraction of the commanded speed that counts as "at speed"
AT_SPEED = 0.9

# (name, unit) for the fixed CSV report
REPORT_COLUMNS = [
    ("uptime_fraction", "fraction"),
    ("avg_speed", "m/s"),
    ("commanded_speed", "m/s"),
    ("distance", "m"),
    ("elapsed_time", "s"),
    ("point_turn_count", "count"),
    ("point_turn_time", "s"),
    ("collisions", "count"),
    ("detection_precision", "fraction"),
    ("detection_recall", "fraction"),
    ("rms_cross_track", "m"),
    ("goal_reached", "bool"),
    ("time_FASTER", "s"),
    ("time_RAPID", "s"),
    ("time_TELEOP", "s"),
    ("time_SAFE_STOP", "s"),
    ("response_time_mean", "s"),
    ("response_time_max", "s"),
    ("alerts", "count"),
    ("missed_alerts", "count"),
    ("ack_timeouts", "count"),
    ("tasks_completed", "count"),
    ("task_duration_mean", "s"),
    ("throughput", "tasks/h"),
    ("coverage_multi", "fraction"),
    ("coverage_single", "fraction"),
    ("coverage_ratio", "ratio"),
]


@dataclass
class CoordinationStats:
    response_times: list = field(default_factory=list)
    falls: int = 0
    missed_alerts: int = 0
    ack_timeouts: int = 0
    task_durations: dict = field(default_factory=dict)
    incomplete_tasks: list = field(default_factory=list)
    throughput: float = 0.0
    coverage_multi: float | None = None
    coverage_single: float | None = None

    @property
    def mean_response(self) -> float | None:
        return float(np.mean(self.response_times)) if self.response_times else None

    @property
    def success_rate(self) -> float | None:
        return (self.falls - self.missed_alerts) / self.falls if self.falls else None

    @property
    def coverage_ratio(self) -> float | None:
        if self.coverage_multi is None or not self.coverage_single:
            return None
        return self.coverage_multi / self.coverage_single


@dataclass
class MetricsReport:
    uptime_fraction: float
    avg_speed: float
    commanded_speed: float
    distance: float
    elapsed_time: float
    point_turn_count: int
    point_turn_time: float
    collisions: int
    detection_precision: float | None
    detection_recall: float | None
    rms_cross_track: float
    mode_time_breakdown: dict
    goal_reached: bool
    coordination: CoordinationStats | None = None
    scenario: dict = field(default_factory=dict, repr=False)

    def flat(self) -> dict:
        """Metric name -> value in :data:`REPORT_COLUMNS` order."""
        out = {}
        c = self.coordination
        coord = {}
        if c is not None:
            coord = {
                "response_time_mean": c.mean_response,
                "response_time_max": max(c.response_times) if c.response_times else None,
                "alerts": len(c.response_times),
                "missed_alerts": c.missed_alerts,
                "ack_timeouts": c.ack_timeouts,
                "tasks_completed": len(c.task_durations),
                "task_duration_mean": float(np.mean(list(c.task_durations.values())))
                if c.task_durations else None,
                "throughput": c.throughput,
                "coverage_multi": c.coverage_multi,
                "coverage_single": c.coverage_single,
                "coverage_ratio": c.coverage_ratio,
            }
        for name, _ in REPORT_COLUMNS:
            if name.startswith("time_"):
                out[name] = self.mode_time_breakdown.get(name[5:], 0.0)
            elif hasattr(self, name):
                out[name] = getattr(self, name)
            else:
                out[name] = coord.get(name)
        return out

    def to_csv(self) -> str:
        """Fixed three-column table: metric, unit, value (empty when undefined)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "unit", "value"])
        flat = self.flat()
        for name, unit in REPORT_COLUMNS:
            v = flat[name]
            w.writerow([name, unit, "" if v is None else (int(v) if isinstance(v, bool) else v)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("scenario", None)
        return d


def _check_integrity(records: list[dict]) -> tuple[dict, dict, list[dict]]:
    if not records or records[0].get("type") != "header":
        raise LogIntegrityError("log does not start with a header record")
    if records[-1].get("type") != "end":
        raise LogIntegrityError("log has no end record; the run was truncated")
    header, end = records[0], records[-1]
    states = [r for r in records if r.get("type") == "state"]
    if len(states) != end["ticks"]:
        raise LogIntegrityError(f"expected {end['ticks']} state records, found {len(states)}")
    dt = header["dt"]
    for i, r in enumerate(states):
        if abs(r["t"] - (i + 1) * dt) > 1e-6:
            raise LogIntegrityError(f"state record {i} has t={r['t']}, expected {(i + 1) * dt}")
    last = -math.inf
    for r in records[1:-1]:
        if r["t"] < last - 1e-9 and r.get("type") != "coverage":
            raise LogIntegrityError(f"record times go backwards at t={r['t']}")
        if r.get("type") != "coverage":
            last = r["t"]
    return header, end, states


def count_collisions(positions: np.ndarray, hazards) -> int:
    """Number of entries of the pose trace into an obstacle footprint."""
    if len(positions) == 0:
        return 0
    count = 0
    for x, y, r, _kind, obstacle in hazards:
        if not obstacle:
            continue
        inside = np.hypot(positions[:, 0] - x, positions[:, 1] - y) < r
        count += int(inside[0]) + int(np.count_nonzero(inside[1:] & ~inside[:-1]))
    return count


def compute_metrics(log, scenario=None) -> MetricsReport:
    """Metrics for a complete event log (``scenario`` is accepted for symmetry; the header suffices)."""
    records = list(log)
    header, end, states = _check_integrity(records)
    dt = header["dt"]
    commanded = header["commanded_speed"]
    n = len(states)
    elapsed = n * dt

    if n:
        pos = np.array([[r["x"], r["y"]] for r in states])
        start = np.asarray(header.get("initial_pose", [pos[0, 0], pos[0, 1]])[:2], dtype=float)
        steps = np.diff(np.vstack([start, pos]), axis=0)
        distance = float(np.hypot(steps[:, 0], steps[:, 1]).sum())
        up = sum(1 for r in states if not r["turning"] and r["cmd"] > 0 and r["v"] >= AT_SPEED * r["cmd"] - 1e-12)
        turning = sum(1 for r in states if r["turning"])
        modes = {m.value: 0.0 for m in NavMode}
        for r in states:
            modes[r["mode"]] += dt
        moving = [r["xte"] for r in states if r["v"] > 0]
        rms = float(np.sqrt(np.mean(np.square(moving)))) if moving else 0.0
        collisions = count_collisions(np.vstack([start, pos]), header.get("hazards", []))
    else:
        distance, up, turning, rms, collisions = 0.0, 0, 0, 0.0, 0
        modes = {m.value: 0.0 for m in NavMode}

    kept_true = kept = visible = 0
    for r in records:
        if r.get("type") == "sense":
            visible += r["visible"]
            for d in r["detections"]:
                if d["kept"]:
                    kept += 1
                    kept_true += d["match"]
    precision = kept_true / kept if kept else None
    recall = min(kept_true / visible, 1.0) if visible else None

    coordination = None
    if "coordination" in end or any(r.get("type") == "coverage" for r in records):
        c = end.get("coordination", {})
        durations, incomplete = measure_task_completion(records)
        done_times = [r["t"] for r in records if r.get("type") == "task" and r["event"] == "done"]
        cov = next((r for r in records if r.get("type") == "coverage"), None)
        coordination = CoordinationStats(
            response_times=[r["response"] for r in records if r.get("type") == "alert"],
            falls=c.get("falls", 0),
            missed_alerts=c.get("missed_alerts", 0),
            ack_timeouts=sum(1 for r in records if r.get("type") == "ack_timeout"),
            task_durations=durations,
            incomplete_tasks=incomplete,
            throughput=len(done_times) / max(done_times) * 3600.0 if done_times and max(done_times) > 0 else 0.0,
            coverage_multi=cov["multi"] if cov else None,
            coverage_single=cov["single"] if cov else None,
        )

    return MetricsReport(
        uptime_fraction=up / n if n else 0.0,
        avg_speed=distance / elapsed if elapsed > 0 else 0.0,
        commanded_speed=commanded,
        distance=distance,
        elapsed_time=elapsed,
        point_turn_count=sum(1 for r in records if r.get("type") == "point_turn"),
        point_turn_time=turning * dt,
        collisions=collisions,
        detection_precision=precision,
        detection_recall=recall,
        rms_cross_track=rms,
        mode_time_breakdown=modes,
        goal_reached=end.get("reason") == "goal",
        coordination=coordination,
        scenario=header.get("scenario", {}),
    )


def daily_traverse_projection(report_or_speed, ops_hours_per_sol: float) -> float:
    """Metres per sol at the run's average speed over ``ops_hours_per_sol`` of driving."""
    if not ops_hours_per_sol > 0:
        raise DomainError("ops_hours_per_sol must be > 0")
    v = report_or_speed.avg_speed if isinstance(report_or_speed, MetricsReport) else float(report_or_speed)
    return v * 3600.0 * ops_hours_per_sol


# driving hours per sol used for the documented projections
OPS_HOURS_PER_SOL = 0.23
