"""Discrete-event multi-agent coordination over a latency-configurable message bus."""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np
from scipy.spatial import cKDTree

from .errors import AllocationError, LogIntegrityError, RoutingError, ValidationError
from .path import Path
from .terrain import Label

# an acknowledgement landing exactly on the deadline still counts
ACK_GRACE = 1e-9


class Role(str, enum.Enum):
    LEADER = "Leader"
    SECONDARY = "Secondary"
    ASTRONAUT = "Astronaut"


class Status(str, enum.Enum):
    NOMINAL = "Nominal"
    FALLEN = "Fallen"
    BUSY = "Busy"
    IDLE = "Idle"


class MessageKind(str, enum.Enum):
    SENSOR_EVENT = "SensorEvent"
    ALERT = "Alert"
    TASK_ASSIGN = "TaskAssign"
    TASK_DONE = "TaskDone"
    HEARTBEAT = "Heartbeat"


@dataclass
class Agent:
    id: str
    role: Role
    position: tuple[float, float] = (0.0, 0.0)
    status: Status = Status.NOMINAL
    speed: float = 0.5

    def __post_init__(self):
        self.role = Role(self.role)
        self.status = Status(self.status)
        self.position = (float(self.position[0]), float(self.position[1]))


@dataclass
class Message:
    sender: str
    recipient: str
    kind: MessageKind
    payload: dict = field(default_factory=dict)
    send_time: float | None = None
    deliver_time: float | None = None

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "sender": self.sender, "recipient": self.recipient,
                "send_time": self.send_time, "deliver_time": self.deliver_time, "payload": self.payload}


@dataclass(frozen=True)
class BusConfig:
    latency: float = 0.5
    jitter: float = 0.0
    drop_rate: float = 0.0

    def __post_init__(self):
        if self.latency < 0:
            raise ValidationError("latency", "must be >= 0")
        if self.jitter < 0:
            raise ValidationError("jitter", "must be >= 0")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ValidationError("drop_rate", "must lie in [0, 1)")


@dataclass(frozen=True)
class Task:
    id: str
    position: tuple[float, float]
    duration: float


class MessageBus:
    """Routes messages with latency and jitter while keeping per-pair FIFO order."""

    def __init__(self, cfg: BusConfig, agent_ids: Iterable[str]):
        self.cfg = cfg
        self.agents = set(agent_ids)
        self._last_delivery: dict[tuple[str, str], float] = {}
        self.sent = 0
        self.dropped = 0

    def dispatch(self, msg: Message, now: float, rng: np.random.Generator) -> Message | None:
        """Stamp ``msg`` with send/delivery times, or return None when it is dropped."""
        if msg.recipient not in self.agents:
            raise RoutingError(f"unknown recipient {msg.recipient!r}")
        if msg.sender not in self.agents:
            raise RoutingError(f"unknown sender {msg.sender!r}")
        self.sent += 1
        msg.send_time = now
        if self.cfg.drop_rate > 0 and rng.random() < self.cfg.drop_rate:
            self.dropped += 1
            return None
        delay = self.cfg.latency
        if self.cfg.jitter > 0:
            delay += rng.uniform(-self.cfg.jitter, self.cfg.jitter)
        pair = (msg.sender, msg.recipient)
        deliver = max(now + max(delay, 0.0), self._last_delivery.get(pair, -math.inf))
        self._last_delivery[pair] = deliver
        msg.deliver_time = deliver
        return msg


def dispatch(bus: MessageBus, msg: Message, now: float, rng: np.random.Generator) -> Message | None:
    return bus.dispatch(msg, now, rng)


class EventQueue:
    """Time-ordered event heap; ties resolve in scheduling order."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()
        self.now = 0.0

    def push(self, time: float, kind: str, data: Any = None) -> None:
        if time < self.now - 1e-12:
            raise ValueError(f"cannot schedule {kind} at {time} before now={self.now}")
        heapq.heappush(self._heap, (time, next(self._seq), kind, data))

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def pop(self):
        time, _, kind, data = heapq.heappop(self._heap)
        assert time >= self.now - 1e-12, "event queue went backwards"
        self.now = max(self.now, time)
        return time, kind, data

    def __len__(self) -> int:
        return len(self._heap)


# ---------------------------------------------------------------------------
# task allocation


def _travel(a, b, speed: float) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1]) / speed


def eligible_agents(agents: Iterable[Agent]) -> list[Agent]:
    return [a for a in agents if a.role is Role.SECONDARY and a.status is not Status.FALLEN]


def assign_tasks(leader: Agent, agents: Iterable[Agent], tasks: list[Task]) -> dict[str, list[int]]:
    """Greedy allocation: repeatedly give the task that can finish earliest to the agent that finishes it.

    Agents route from their current position and become available again when a
    task finishes; the returned lists are each agent's task indices in order.
    """
    pool = [a for a in eligible_agents(agents) if a.id != leader.id]
    if not pool:
        raise AllocationError("no eligible (non-leader, non-fallen) robot agents")
    alloc: dict[str, list[int]] = {a.id: [] for a in pool}
    free_at = {a.id: 0.0 for a in pool}
    where = {a.id: a.position for a in pool}
    remaining = list(range(len(tasks)))
    while remaining:
        best = None
        for a in pool:
            for k in remaining:
                finish = free_at[a.id] + _travel(where[a.id], tasks[k].position, a.speed) + tasks[k].duration
                if best is None or finish < best[0] - 1e-12:
                    best = (finish, a.id, k)
        finish, aid, k = best
        alloc[aid].append(k)
        free_at[aid] = finish
        where[aid] = tasks[k].position
        remaining.remove(k)
    return alloc


def makespan(alloc: dict[str, list[int]], agents: Iterable[Agent], tasks: list[Task]) -> float:
    by_id = {a.id: a for a in agents}
    worst = 0.0
    for aid, order in alloc.items():
        a = by_id[aid]
        t, pos = 0.0, a.position
        for k in order:
            t += _travel(pos, tasks[k].position, a.speed) + tasks[k].duration
            pos = tasks[k].position
        worst = max(worst, t)
    return worst


# ---------------------------------------------------------------------------
# coordination simulation


@dataclass
class _Worker:
    agent: Agent
    queue: list[str] = field(default_factory=list)
    pending: list[str] = field(default_factory=list)
    active: str | None = None
    awaiting_ack: str | None = None
    hold_until: float = -math.inf


class CoordinationSim:
    """Leader/secondary/astronaut coordination on one discrete-event clock.

    Fall events travel wearable -> leader (SensorEvent), are processed for
    ``proc_delay`` and answered with an Alert to the responder and the
    astronaut. Secondary agents run assigned tasks and must see the leader's
    acknowledgement of each TaskDone within ``ack_timeout``; otherwise they
    enter a safe hold of ``hold_time`` before retransmitting.
    """

    def __init__(self, agents: list[Agent], bus_cfg: BusConfig, rng: np.random.Generator, *,
                 proc_delay: float = 0.2, ack_timeout: float = 2.0, hold_time: float = 5.0,
                 retransmit: bool = False, retransmit_timeout: float = 3.0, max_retries: int = 3,
                 emit: Callable[[dict], None] | None = None):
        ids = [a.id for a in agents]
        if len(set(ids)) != len(ids):
            raise ValidationError("agents", "agent ids must be unique")
        leaders = [a for a in agents if a.role is Role.LEADER]
        if len(leaders) != 1:
            raise ValidationError("agents", f"exactly one Leader required (found {len(leaders)})")
        if proc_delay < 0:
            raise ValidationError("proc_delay", "must be >= 0")
        self.agents = {a.id: a for a in agents}
        self.leader = leaders[0]
        self.bus = MessageBus(bus_cfg, ids)
        self.rng = rng
        self.proc_delay = proc_delay
        self.ack_timeout = ack_timeout
        self.hold_time = hold_time
        self.retransmit = retransmit
        self.retransmit_timeout = retransmit_timeout
        self.max_retries = max_retries
        self.queue = EventQueue()
        self.records: list[dict] = []
        self._emit = emit
        secondaries = [a for a in agents if a.role is Role.SECONDARY]
        self.responder = secondaries[0].id if secondaries else None
        self.workers = {a.id: _Worker(a) for a in secondaries}
        self.tasks: dict[str, Task] = {}
        self.falls: dict[str, dict] = {}
        self.alerts: list[dict] = []
        self.completed: dict[str, float] = {}
        self.timeouts = 0
        self._fall_ids = itertools.count()

    # -- scheduling -------------------------------------------------------
    def schedule_fall(self, time: float, astronaut_id: str) -> str:
        if astronaut_id not in self.agents:
            raise RoutingError(f"unknown astronaut {astronaut_id!r}")
        fid = f"fall-{next(self._fall_ids)}"
        self.falls[fid] = {"time": time, "agent": astronaut_id, "confirmed": False, "processed": False,
                           "alerted": False}
        self.queue.push(time, "fall", fid)
        return fid

    def start_tasks(self, tasks: list[Task], time: float = 0.0) -> dict[str, list[int]]:
        alloc = assign_tasks(self.leader, self.agents.values(), tasks)
        for t in tasks:
            self.tasks[t.id] = t
        for aid, order in alloc.items():
            self.workers[aid].queue = [tasks[k].id for k in order]
        self.queue.push(time, "leader_assign", list(alloc))
        return alloc

    # -- plumbing ---------------------------------------------------------
    def _record(self, rec: dict) -> None:
        self.records.append(rec)
        if self._emit is not None:
            self._emit(rec)

    def _send(self, sender: str, recipient: str, kind: MessageKind, payload: dict, now: float) -> None:
        msg = self.bus.dispatch(Message(sender, recipient, kind, dict(payload)), now, self.rng)
        if msg is None:
            self._record({"t": now, "type": "msg_drop", "kind": kind.value, "sender": sender,
                          "recipient": recipient, "payload": dict(payload)})
            return
        self.queue.push(msg.deliver_time, "deliver", msg)

    def _assign_next(self, aid: str, now: float) -> None:
        w = self.workers[aid]
        if w.queue:
            tid = w.queue.pop(0)
            self._record({"t": now, "type": "task", "event": "assign", "task": tid, "agent": aid})
            self._send(self.leader.id, aid, MessageKind.TASK_ASSIGN, {"task": tid}, now)

    def _try_start(self, w: _Worker, now: float) -> None:
        if w.active is not None or w.awaiting_ack is not None or now < w.hold_until or not w.pending:
            return
        tid = w.pending.pop(0)
        task = self.tasks[tid]
        w.active = tid
        w.agent.status = Status.BUSY
        finish = now + _travel(w.agent.position, task.position, w.agent.speed) + task.duration
        self.queue.push(finish, "work_done", (w.agent.id, tid))

    # -- main loop --------------------------------------------------------
    def run_until(self, t_end: float) -> None:
        while len(self.queue) and self.queue.peek_time() <= t_end:
            now, kind, data = self.queue.pop()
            getattr(self, f"_on_{kind}")(now, data)

    def run(self) -> None:
        self.run_until(math.inf)

    def _on_fall(self, now, fid):
        fall = self.falls[fid]
        self.agents[fall["agent"]].status = Status.FALLEN
        self._record({"t": now, "type": "fall", "fall_id": fid, "agent": fall["agent"]})
        self._send(fall["agent"], self.leader.id, MessageKind.SENSOR_EVENT,
                   {"fall_id": fid, "fall_time": fall["time"]}, now)
        if self.retransmit:
            self.queue.push(now + self.retransmit_timeout, "retx_sensor", (fid, 1))

    def _on_retx_sensor(self, now, data):
        fid, attempt = data
        fall = self.falls[fid]
        if fall["confirmed"] or attempt > self.max_retries:
            return
        self._send(fall["agent"], self.leader.id, MessageKind.SENSOR_EVENT,
                   {"fall_id": fid, "fall_time": fall["time"], "retry": attempt}, now)
        self.queue.push(now + self.retransmit_timeout, "retx_sensor", (fid, attempt + 1))

    def _on_proc_done(self, now, fid):
        fall = self.falls[fid]
        payload = {"fall_id": fid, "fall_time": fall["time"]}
        if self.responder is not None:
            self._send(self.leader.id, self.responder, MessageKind.ALERT, payload, now)
            if self.retransmit and not fall.get("retx_alert"):
                fall["retx_alert"] = True
                self.queue.push(now + self.retransmit_timeout, "retx_alert", (fid, 1))
        self._send(self.leader.id, fall["agent"], MessageKind.ALERT, payload, now)

    def _on_retx_alert(self, now, data):
        fid, attempt = data
        fall = self.falls[fid]
        if fall.get("acked") or attempt > self.max_retries:
            return
        self._send(self.leader.id, self.responder, MessageKind.ALERT,
                   {"fall_id": fid, "fall_time": fall["time"], "retry": attempt}, now)
        self.queue.push(now + self.retransmit_timeout, "retx_alert", (fid, attempt + 1))

    def _on_leader_assign(self, now, agent_ids):
        for aid in agent_ids:
            self._assign_next(aid, now)

    def _on_work_done(self, now, data):
        aid, tid = data
        w = self.workers[aid]
        w.agent.position = self.tasks[tid].position
        w.agent.status = Status.IDLE
        w.active = None
        w.awaiting_ack = tid
        self._send(aid, self.leader.id, MessageKind.TASK_DONE, {"task": tid}, now)
        self.queue.push(now + self.ack_timeout + ACK_GRACE, "ack_timeout", (aid, tid))

    def _on_ack_timeout(self, now, data):
        aid, tid = data
        w = self.workers[aid]
        if w.awaiting_ack != tid or now < w.hold_until:
            return
        self.timeouts += 1
        w.hold_until = now + self.hold_time
        self._record({"t": now, "type": "ack_timeout", "agent": aid, "task": tid})
        self.queue.push(w.hold_until, "hold_end", (aid, tid))

    def _on_hold_end(self, now, data):
        aid, tid = data
        w = self.workers[aid]
        if w.awaiting_ack == tid:
            self._send(aid, self.leader.id, MessageKind.TASK_DONE, {"task": tid, "retry": True}, now)
            self.queue.push(now + self.ack_timeout + ACK_GRACE, "ack_timeout", (aid, tid))
        else:
            self._try_start(w, now)

    def _on_deliver(self, now, msg: Message):
        self._record({"t": now, "type": "msg", **msg.to_record()})
        handler = getattr(self, f"_recv_{msg.kind.name.lower()}")
        handler(now, msg)

    def _recv_sensor_event(self, now, msg):
        fid = msg.payload["fall_id"]
        fall = self.falls[fid]
        if not fall["processed"]:
            fall["processed"] = True
            self.queue.push(now + self.proc_delay, "proc_done", fid)
        elif self.retransmit:
            self._on_proc_done(now, fid)

    def _recv_alert(self, now, msg):
        fid = msg.payload["fall_id"]
        fall = self.falls[fid]
        if msg.recipient == fall["agent"]:
            fall["confirmed"] = True
        if msg.recipient == self.responder or self.responder is None:
            if self.retransmit and self.responder is not None:
                self._send(self.responder, self.leader.id, MessageKind.HEARTBEAT, {"alert_ack": fid}, now)
            if not fall["alerted"]:
                fall["alerted"] = True
                response = now - fall["time"]
                self.alerts.append({"fall_id": fid, "fall_time": fall["time"], "alert_time": now,
                                    "response": response})
                self._record({"t": now, "type": "alert", "fall_id": fid, "response": response})

    def _recv_task_assign(self, now, msg):
        w = self.workers[msg.recipient]
        w.pending.append(msg.payload["task"])
        self._try_start(w, now)

    def _recv_task_done(self, now, msg):
        tid = msg.payload["task"]
        aid = msg.sender
        self._send(self.leader.id, aid, MessageKind.HEARTBEAT, {"ack": tid}, now)
        if tid not in self.completed:
            self.completed[tid] = now
            self._record({"t": now, "type": "task", "event": "done", "task": tid, "agent": aid})
            self._assign_next(aid, now)

    def _recv_heartbeat(self, now, msg):
        if "alert_ack" in msg.payload:
            self.falls[msg.payload["alert_ack"]]["acked"] = True
            return
        w = self.workers.get(msg.recipient)
        if w is None:
            return
        if w.awaiting_ack is not None and w.awaiting_ack == msg.payload.get("ack"):
            w.awaiting_ack = None
            self._try_start(w, now)

    # -- summaries --------------------------------------------------------
    @property
    def missed_alerts(self) -> int:
        return sum(1 for f in self.falls.values() if not f["alerted"])

    def response_times(self) -> list[float]:
        return [a["response"] for a in self.alerts]

    def throughput(self) -> float:
        """Completed tasks per hour up to the last completion."""
        if not self.completed:
            return 0.0
        return len(self.completed) / max(self.completed.values()) * 3600.0


@dataclass
class EmergencyReport:
    alerts: list[dict]
    missed: int
    trials: int

    @property
    def response_times(self) -> list[float]:
        return [a["response"] for a in self.alerts]

    @property
    def mean_response(self) -> float:
        return float(np.mean(self.response_times)) if self.alerts else math.nan

    @property
    def success_rate(self) -> float:
        return len(self.alerts) / self.trials if self.trials else 1.0


def detect_emergency(astronaut_events, proc_delay: float = 0.2, bus: BusConfig | None = None,
                     rng: np.random.Generator | None = None, retransmit: bool = False) -> EmergencyReport:
    """Run fall events through the wearable -> leader -> alert pipeline.

    ``astronaut_events`` is an iterable of ``(fall_time, astronaut_id)``.
    """
    bus = bus or BusConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    events = [(float(t), str(a)) for t, a in astronaut_events]
    agents = [Agent("leader", Role.LEADER), Agent("secondary", Role.SECONDARY)]
    agents += [Agent(a, Role.ASTRONAUT) for a in sorted({a for _, a in events})]
    sim = CoordinationSim(agents, bus, rng, proc_delay=proc_delay, retransmit=retransmit)
    for t, a in events:
        sim.schedule_fall(t, a)
    sim.run()
    return EmergencyReport(sim.alerts, sim.missed_alerts, len(events))


# ---------------------------------------------------------------------------
# coverage and timing


def coverage_metric(pose_logs, world, sensor_radius: float) -> float:
    """Fraction of non-hazard cells whose centre lies within ``sensor_radius`` of any logged pose."""
    if sensor_radius <= 0:
        raise ValueError("sensor_radius must be > 0")
    logs = pose_logs.values() if isinstance(pose_logs, dict) else pose_logs
    arrays = [np.asarray(p, dtype=float).reshape(-1, 2) for p in logs]
    arrays = [a for a in arrays if len(a)]
    free = ~np.isin(world.labels, (Label.BOULDER, Label.CRATER))
    if not arrays or not free.any():
        return 0.0
    xs, ys = world.cell_centers()
    cells = np.column_stack([xs[free], ys[free]])
    dist, _ = cKDTree(np.vstack(arrays)).query(cells, distance_upper_bound=sensor_radius * (1 + 1e-12))
    return float(np.count_nonzero(dist <= sensor_radius) / len(cells))


def lawnmower_path(bounds: tuple[float, float, float, float], spacing: float) -> Path:
    """Boustrophedon lanes along x covering ``(x0, y0, x1, y1)``."""
    x0, y0, x1, y1 = bounds
    pts = []
    y = y0 + spacing / 2.0
    left = True
    while y < y1:
        pts += [(x0, y), (x1, y)] if left else [(x1, y), (x0, y)]
        left = not left
        y += spacing
    if not pts:
        pts = [(x0, (y0 + y1) / 2), (x1, (y0 + y1) / 2)]
    return Path.from_points(pts)


def sweep_log(path: Path, speed: float, duration: float, dt: float = 1.0) -> np.ndarray:
    """Positions along ``path`` sampled every ``dt`` seconds for ``duration``."""
    times = np.arange(0.0, duration + 1e-9, dt)
    return np.array([path.point_at(speed * t) for t in times])


def partitioned_sweep(world, n_agents: int, duration: float, speed: float, spacing: float,
                      dt: float = 1.0) -> dict[str, np.ndarray]:
    """Each agent sweeps its own horizontal strip of the terrain for ``duration``."""
    w, h = world.extent
    logs = {}
    for k in range(n_agents):
        strip = (0.0, h * k / n_agents, w, h * (k + 1) / n_agents)
        logs[f"agent-{k}"] = sweep_log(lawnmower_path(strip, spacing), speed, duration, dt)
    return logs


def measure_task_completion(event_log) -> tuple[dict[str, float], list[str]]:
    """Per-task durations from assign/done records, plus the ids never completed."""
    assigned: dict[str, float] = {}
    done: dict[str, float] = {}
    for rec in event_log:
        if rec.get("type") != "task":
            continue
        tid = rec["task"]
        if rec["event"] == "assign":
            assigned.setdefault(tid, rec["t"])
        elif rec["event"] == "done":
            if tid not in assigned:
                raise LogIntegrityError(f"TaskDone for {tid!r} without a TaskAssign")
            done.setdefault(tid, rec["t"])
    durations = {tid: done[tid] - assigned[tid] for tid in assigned if tid in done}
    incomplete = [tid for tid in assigned if tid not in done]
    return durations, incomplete
