import math

import pytest

from roversim import EventLog, compute_metrics, daily_traverse_projection, run, sweep
from roversim.errors import DomainError, LogIntegrityError, ValidationError
from roversim.harness import Simulation
from roversim.metrics import REPORT_COLUMNS, count_collisions
from roversim.scenario import load_scenario

from conftest import run_shipped, scenario_doc

SHORT = {
    "name": "short",
    "terrain": {"size_cells": [80, 24], "amplitude": 0.0},
    "route": {"start": [2.0, 6.0], "course": {"kind": "straight", "length": 30.0}},
    "sim": {"seed": 3, "max_time": 120.0},
}


def _synthetic(states, dt=0.1, commanded=0.7, extra=()):
    recs = [{"type": "header", "dt": dt, "commanded_speed": commanded, "hazards": [],
             "initial_pose": [0.0, 0.0, 0.0]}]
    recs += list(extra)
    x = 0.0
    for i, (v, cmd, turning) in enumerate(states):
        x += v * dt
        recs.append({"type": "state", "t": (i + 1) * dt, "x": x, "y": 0.0, "heading": 0.0, "v": v, "omega": 0.0,
                     "mode": "FASTER", "cmd": cmd, "turning": turning, "xte": 0.0})
    recs.append({"type": "end", "t": len(states) * dt, "ticks": len(states), "reason": "goal"})
    return EventLog(recs)


class TestSyntheticMetrics:
    def test_full_speed(self):
        rep = compute_metrics(_synthetic([(0.7, 0.7, False)] * 100))
        assert rep.uptime_fraction == 1.0
        assert rep.avg_speed == pytest.approx(0.7)
        assert rep.distance == pytest.approx(7.0)

    def test_half_point_turning(self):
        states = [(0.7, 0.7, False)] * 50 + [(0.0, 0.7, True)] * 50
        rep = compute_metrics(_synthetic(states))
        assert rep.uptime_fraction == 0.5
        assert rep.avg_speed == pytest.approx(0.35)
        assert rep.point_turn_time == pytest.approx(5.0)

    def test_below_threshold_not_up(self):
        rep = compute_metrics(_synthetic([(0.62, 0.7, False)] * 10 + [(0.64, 0.7, False)] * 10))
        assert rep.uptime_fraction == 0.5

    def test_precision_recall(self):
        sense = [{"type": "sense", "t": 0.0, "visible": 4, "detections": [
            {"match": True, "kept": True}, {"match": True, "kept": True}, {"match": False, "kept": True},
            {"match": True, "kept": False}, {"match": False, "kept": False}]}]
        rep = compute_metrics(_synthetic([(0.7, 0.7, False)] * 3, extra=sense))
        assert rep.detection_precision == pytest.approx(2 / 3)
        assert rep.detection_recall == pytest.approx(2 / 4)

    def test_truncated(self):
        log = _synthetic([(0.7, 0.7, False)] * 10)
        with pytest.raises(LogIntegrityError):
            compute_metrics(EventLog(log.records[:-1]))
        with pytest.raises(LogIntegrityError):
            compute_metrics(EventLog(log.records[:5] + log.records[6:]))
        with pytest.raises(LogIntegrityError):
            compute_metrics(EventLog(log.records[1:]))

    def test_collision_entries(self):
        import numpy as np
        pos = np.array([[0, 0], [1, 0], [2, 0], [3, 0], [2, 0], [0, 0]], dtype=float)
        hz = [[2.0, 0.0, 0.6, "Boulder", True], [0.0, 0.0, 5.0, "Dune", False]]
        assert count_collisions(pos, hz) == 2

    def test_csv_columns(self):
        text = compute_metrics(_synthetic([(0.7, 0.7, False)] * 10)).to_csv().splitlines()
        assert text[0] == "metric,unit,value"
        assert [line.split(",")[0] for line in text[1:]] == [n for n, _ in REPORT_COLUMNS]


class TestProjection:
    def test_examples(self):
        assert daily_traverse_projection(0.43, 0.23) == pytest.approx(356.04)
        assert daily_traverse_projection(0.10, 0.23) == pytest.approx(82.8)
        assert daily_traverse_projection(0.0, 0.23) == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            daily_traverse_projection(0.5, 0.0)


class TestRun:
    def test_deterministic_bytes(self):
        a, _ = run(SHORT)
        b, _ = run(SHORT)
        assert a.to_bytes() == b.to_bytes()

    def test_seed_changes_log(self):
        a, _ = run(SHORT)
        b, _ = run({**SHORT, "sim": {"seed": 4, "max_time": 120.0}})
        assert a.to_bytes() != b.to_bytes()

    def test_log_completeness(self):
        log, rep = run(SHORT)
        end = log.records[-1]
        states = log.of_type("state")
        assert len(states) == end["ticks"]
        # 1 Hz publishing at dt 0.1: one sense record per simulated second
        assert len(log.of_type("sense")) == math.ceil(end["ticks"] / 10)
        assert rep.goal_reached
        assert rep.uptime_fraction >= 0.98

    def test_replan_cadence(self, monkeypatch):
        calls = []
        orig = Simulation._replan

        def spy(self, t):
            calls.append(round(t / self.sc.sim.dt))
            return orig(self, t)
        monkeypatch.setattr(Simulation, "_replan", spy)
        log, _ = run(SHORT)
        assert calls == list(range(0, log.records[-1]["ticks"], 5))

    def test_publish_hz_cadence(self):
        log, _ = run({**SHORT, "detector": {"publish_hz": 5}})
        times = [r["t"] for r in log.of_type("sense")]
        assert all(b - a == pytest.approx(0.2) for a, b in zip(times, times[1:]))

    def test_fod_outage_falls_back_to_rapid(self):
        doc = {**SHORT, "operation": {"fod_outages": [[5.0, 15.0]]}, "sim": {"seed": 3, "max_time": 200.0}}
        log, _ = run(doc)
        modes = {round(r["t"], 1): r["mode"] for r in log.of_type("state")}
        assert modes[4.0] == "FASTER"
        assert all(modes[round(t * 0.1, 1)] == "RAPID" for t in range(75, 150))
        assert modes[18.0] == "FASTER"
        assert not any(4.0 < r["t"] < 15.0 for r in log.of_type("sense"))

    def test_round_trip_through_file(self, tmp_path):
        log, rep = run(SHORT)
        again = compute_metrics(EventLog.read(log.write(tmp_path / "x.jsonl")))
        assert again.to_csv() == rep.to_csv()

    def test_bad_json_line(self, tmp_path):
        f = tmp_path / "bad.jsonl"
        f.write_text('{"type": "header"}\n{"type": \n')
        with pytest.raises(LogIntegrityError):
            EventLog.read(f)

    def test_header_echoes_defaults(self):
        log, _ = run(SHORT)
        doc = log.records[0]["scenario"]
        assert doc["gnc"]["d_stop"] == 1.5 and doc["detector"]["publish_hz"] == 1.0
        assert load_scenario(doc) == load_scenario(SHORT)

    def test_hazard_straddle_is_safe(self):
        log, rep = run_shipped("hazard_straddle")
        hz = log.records[0]["hazards"]
        obstacles = [h for h in hz if h[4]]
        assert obstacles
        for r in log.of_type("state"):
            for x, y, rad, _, _ in obstacles:
                assert math.hypot(r["x"] - x, r["y"] - y) >= rad
        assert rep.collisions == 0


class TestSweep:
    def test_single_value_equals_run(self):
        sc = load_scenario(SHORT)
        res = sweep(sc, "gnc.v_cmd_faster", [0.7])
        _, rep = run(sc)
        assert res.reports[0].flat() == rep.flat()

    def test_seed_policy(self):
        res = sweep(SHORT, "gnc.v_cmd_faster", [0.6, 0.7], seed_policy="per-value")
        assert res.seeds == [3, 4]
        lines = res.to_csv().splitlines()
        assert lines[0].startswith("gnc.v_cmd_faster,seed,seed_policy,uptime_fraction")
        assert lines[1].split(",")[:3] == ["0.6", "3", "per-value"]

    def test_parallel_matches_serial(self):
        serial = sweep(SHORT, "gnc.v_cmd_faster", [0.5, 0.7])
        par = sweep(SHORT, "gnc.v_cmd_faster", [0.5, 0.7], jobs=2)
        assert serial.to_csv() == par.to_csv()

    def test_invalid_path(self):
        with pytest.raises(ValidationError):
            sweep(SHORT, "gnc.warp_factor", [1])
        with pytest.raises(ValidationError):
            sweep(SHORT, "nothing.here", [1])
        with pytest.raises(ValidationError):
            sweep(SHORT, "gnc.v_cmd_faster", [0.7], seed_policy="random")

    def test_latency_sweep_monotone(self):
        doc = scenario_doc("tool_exchange")
        res = sweep(doc, "coordination.bus.latency", [0.2, 0.5, 1.0, 1.5, 2.0])
        means = [r.coordination.mean_response for r in res.reports]
        assert means == sorted(means)
