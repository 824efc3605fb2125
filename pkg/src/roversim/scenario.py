"""Scenario documents: schema, validation and defaulting."""

from __future__ import annotations

import copy
import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

from .coord import BusConfig
from .errors import ValidationError
from .gnc import GncConfig
from .perception import DetectorConfig
from .terrain import HazardSpec, TerrainParams

POLICIES = ("autonomous", "teleop", "baseline")


@dataclass(frozen=True)
class MapConfig:
    hazard_prob_threshold: float = 0.7
    l_min: float = -4.0
    l_max: float = 4.0
    decay_rate: float = 0.02
    corridor_half_width: float = 0.75

    def __post_init__(self):
        if not 0.0 < self.hazard_prob_threshold < 1.0:
            raise ValidationError("hazard_prob_threshold", "must lie strictly between 0 and 1")
        if not self.l_min < 0.0 < self.l_max:
            raise ValidationError("l_min", "clamp bounds must satisfy l_min < 0 < l_max")
        if self.decay_rate < 0:
            raise ValidationError("decay_rate", "must be >= 0")
        if not self.corridor_half_width > 0:
            raise ValidationError("corridor_half_width", "must be > 0")


@dataclass(frozen=True)
class OperationConfig:
    """How the rover is driven: autonomous FASTER/RAPID, scripted teleop, or conventional baseline."""

    policy: str = "autonomous"
    teleop_speed: float = 1.2
    # conventional stop-and-plan cadence used by the baseline policy
    smpa_interval: float = 10.0
    smpa_pause: float = 5.0
    # [start, end] windows during which the far detector publishes nothing
    fod_outages: tuple = ()

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValidationError("policy", f"must be one of {POLICIES}")
        if not self.teleop_speed > 0:
            raise ValidationError("teleop_speed", "must be > 0")
        if not self.smpa_interval > 0:
            raise ValidationError("smpa_interval", "must be > 0")
        if self.smpa_pause < 0:
            raise ValidationError("smpa_pause", "must be >= 0")
        windows = tuple(tuple(float(v) for v in w) for w in self.fod_outages)
        if any(len(w) != 2 or w[1] < w[0] for w in windows):
            raise ValidationError("fod_outages", "each window must be [start, end] with end >= start")
        object.__setattr__(self, "fod_outages", windows)


@dataclass(frozen=True)
class RouteConfig:
    """Either ``start``/``goal`` (planned) or a ``waypoints`` / ``course`` reference to follow."""

    start: tuple | None = None
    goal: tuple | None = None
    waypoints: tuple | None = None
    course: dict | None = None
    start_heading: float | None = None

    def __post_init__(self):
        kinds = sum(x is not None for x in (self.goal, self.waypoints, self.course))
        if kinds != 1:
            raise ValidationError("route", "give exactly one of goal, waypoints or course")
        if self.goal is not None and self.start is None:
            raise ValidationError("start", "required with goal")
        if self.course is not None and self.start is None:
            raise ValidationError("start", "required with course")
        for name in ("start", "goal"):
            v = getattr(self, name)
            if v is not None:
                if len(v) != 2:
                    raise ValidationError(name, "must be [x, y]")
                object.__setattr__(self, name, (float(v[0]), float(v[1])))
        if self.waypoints is not None:
            pts = tuple((float(p[0]), float(p[1])) for p in self.waypoints)
            if len(pts) < 2:
                raise ValidationError("waypoints", "need at least two waypoints")
            object.__setattr__(self, "waypoints", pts)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    max_time: float = 600.0
    seed: int = 0
    goal_tolerance: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt", "must be > 0")
        if not self.max_time > 0:
            raise ValidationError("max_time", "must be > 0")
        if not self.goal_tolerance > 0:
            raise ValidationError("goal_tolerance", "must be > 0")


@dataclass(frozen=True)
class CoverageConfig:
    agents: int = 2
    sensor_radius: float = 1.5
    speed: float = 0.5
    duration: float = 120.0
    spacing: float = 3.0

    def __post_init__(self):
        if self.agents < 1:
            raise ValidationError("agents", "must be >= 1")
        if not self.sensor_radius > 0:
            raise ValidationError("sensor_radius", "must be > 0")
        if not self.speed > 0 or not self.duration > 0 or not self.spacing > 0:
            raise ValidationError("speed", "speed, duration and spacing must be > 0")


@dataclass(frozen=True)
class CoordinationConfig:
    bus: BusConfig = field(default_factory=BusConfig)
    agents: tuple = ()
    tasks: tuple = ()
    fall_schedule: tuple = ()
    proc_delay: float = 0.2
    ack_timeout: float = 2.0
    hold_time: float = 5.0
    retransmit: bool = False
    retransmit_timeout: float = 3.0
    max_retries: int = 3
    coverage: CoverageConfig | None = None

    def __post_init__(self):
        if self.proc_delay < 0:
            raise ValidationError("proc_delay", "must be >= 0")
        if not self.ack_timeout > 0:
            raise ValidationError("ack_timeout", "must be > 0")
        if self.hold_time < 0:
            raise ValidationError("hold_time", "must be >= 0")
        ids = [a["id"] for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValidationError("agents", "agent ids must be unique")
        if self.agents and sum(a["role"] == "Leader" for a in self.agents) != 1:
            raise ValidationError("agents", "exactly one Leader is required")
        for i, f in enumerate(self.fall_schedule):
            if f["agent"] not in ids:
                raise ValidationError(f"fall_schedule[{i}].agent", f"unknown agent {f['agent']!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    terrain: TerrainParams
    detector: DetectorConfig
    gnc: GncConfig
    map: MapConfig
    operation: OperationConfig
    sim: SimConfig
    route: RouteConfig | None = None
    hazards: tuple[HazardSpec, ...] = ()
    coordination: CoordinationConfig | None = None
    document: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def nominal_speed(self) -> float:
        """Commanded speed of the scenario's operating mode."""
        if self.operation.policy == "teleop":
            return min(self.operation.teleop_speed, 1.2)
        if self.operation.policy == "baseline":
            return self.gnc.v_rapid
        return self.gnc.v_cmd_faster


# ---------------------------------------------------------------------------
# loading

_AGENT_KEYS = {"id", "role", "position", "speed", "status"}
_TASK_KEYS = {"id", "position", "duration"}
_FALL_KEYS = {"time", "agent"}
_HAZARD_KEYS = {"center", "radius", "height", "kind"}
_TOP_KEYS = {"name", "terrain", "detector", "gnc", "map", "operation", "sim", "route", "hazards", "coordination"}


def _check_keys(data: Any, allowed, path: str) -> dict:
    if not isinstance(data, dict):
        raise ValidationError(path, "must be an object")
    for key in data:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}" if path else key, "unknown key")
    return data


def _coerce(value, default, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError(path, "must be a boolean")
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, tuple):
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(path, "must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(path, "must be a number")
        return float(value)
    elif isinstance(default, str) and not isinstance(value, str):
        raise ValidationError(path, "must be a string")
    return value


def _section(cls, data, path: str, **overrides):
    data = _check_keys({} if data is None else data, {f.name for f in dataclasses.fields(cls)}, path)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in overrides:
            kwargs[f.name] = overrides[f.name]
        elif f.name in data:
            default = f.default if f.default is not dataclasses.MISSING else None
            kwargs[f.name] = _coerce(data[f.name], default, f"{path}.{f.name}")
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{path}.{exc.path}", exc.message) from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(path, str(exc)) from None


def _items(data, keys, path):
    if data is None:
        return ()
    if not isinstance(data, list):
        raise ValidationError(path, "must be a list")
    return tuple(dict(_check_keys(item, keys, f"{path}[{i}]")) for i, item in enumerate(data))


def load_scenario(document) -> Scenario:
    """Validate a scenario document (dict, JSON text, or file path) and apply defaults."""
    if isinstance(document, (str, FsPath)) and not str(document).lstrip().startswith("{"):
        document = json.loads(FsPath(document).read_text())
    elif isinstance(document, str):
        document = json.loads(document)
    doc = _check_keys(copy.deepcopy(document), _TOP_KEYS, "")
    terrain_doc = dict(doc.get("terrain") or {})
    if "size_cells" in terrain_doc and isinstance(terrain_doc["size_cells"], list):
        terrain_doc["size_cells"] = tuple(terrain_doc["size_cells"])
    terrain = _section(TerrainParams, terrain_doc, "terrain")
    detector = _section(DetectorConfig, doc.get("detector"), "detector")
    gnc = _section(GncConfig, doc.get("gnc"), "gnc")
    mapc = _section(MapConfig, doc.get("map"), "map")
    operation = _section(OperationConfig, doc.get("operation"), "operation")
    sim = _section(SimConfig, doc.get("sim"), "sim")

    hazards = []
    for i, h in enumerate(_items(doc.get("hazards"), _HAZARD_KEYS, "hazards")):
        try:
            hazards.append(HazardSpec(**h))
        except ValidationError as exc:
            raise ValidationError(f"hazards[{i}].{exc.path}", exc.message) from None
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"hazards[{i}]", str(exc)) from None

    route = None
    if doc.get("route") is not None:
        route = _section(RouteConfig, doc["route"], "route")
        w, h = terrain.extent
        pts = [p for p in (route.start, route.goal) if p is not None] + list(route.waypoints or ())
        for p in pts:
            if not (0.0 <= p[0] <= w and 0.0 <= p[1] <= h):
                raise ValidationError("route", f"point {p} lies outside the terrain extent {w} x {h} m")

    coordination = None
    if doc.get("coordination") is not None:
        cdoc = _check_keys(doc["coordination"], {f.name for f in dataclasses.fields(CoordinationConfig)},
                           "coordination")
        bus = _section(BusConfig, cdoc.get("bus"), "coordination.bus")
        coverage = _section(CoverageConfig, cdoc["coverage"], "coordination.coverage") \
            if cdoc.get("coverage") is not None else None
        agents = _items(cdoc.get("agents"), _AGENT_KEYS, "coordination.agents")
        for i, a in enumerate(agents):
            if "id" not in a or "role" not in a:
                raise ValidationError(f"coordination.agents[{i}]", "id and role are required")
            if a["role"] not in ("Leader", "Secondary", "Astronaut"):
                raise ValidationError(f"coordination.agents[{i}].role", "must be Leader, Secondary or Astronaut")
        tasks = _items(cdoc.get("tasks"), _TASK_KEYS, "coordination.tasks")
        falls = _items(cdoc.get("fall_schedule"), _FALL_KEYS, "coordination.fall_schedule")
        rest = {k: v for k, v in cdoc.items() if k not in ("bus", "coverage", "agents", "tasks", "fall_schedule")}
        coordination = _section(CoordinationConfig, rest, "coordination", bus=bus, coverage=coverage,
                                agents=agents, tasks=tasks, fall_schedule=falls)

    scenario = Scenario(
        name=str(doc.get("name", "scenario")),
        terrain=terrain, detector=detector, gnc=gnc, map=mapc, operation=operation, sim=sim,
        route=route, hazards=tuple(hazards), coordination=coordination,
    )
    return dataclasses.replace(scenario, document=scenario_to_dict(scenario))


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name != "document"}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def scenario_to_dict(scenario: Scenario) -> dict:
    """Fully resolved document (defaults included) that reloads to an equal scenario."""
    doc = _plain(scenario)
    for key in ("route", "coordination"):
        if doc[key] is None:
            del doc[key]
    if "route" in doc:
        doc["route"] = {k: v for k, v in doc["route"].items() if v is not None}
    if "coordination" in doc and doc["coordination"]["coverage"] is None:
        del doc["coordination"]["coverage"]
    return doc


def set_path(document: dict, dotted: str, value) -> dict:
    """Copy of ``document`` with the dotted parameter path set to ``value``."""
    doc = copy.deepcopy(document)
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if not isinstance(node, dict):
            raise ValidationError(dotted, f"{key!r} is not an object")
        node = node.setdefault(key, {})
    if not isinstance(node, dict):
        raise ValidationError(dotted, "parent is not an object")
    node[keys[-1]] = value
    return doc
