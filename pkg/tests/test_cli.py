import json

import pytest

from roversim.cli import main, parse_values, resolve_scenario
from roversim.errors import ValidationError

from test_harness import SHORT


@pytest.fixture
def short_file(tmp_path):
    f = tmp_path / "short.json"
    f.write_text(json.dumps(SHORT))
    return f


def test_run_writes_log_to_env_dir(short_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ROVERSIM_LOG_DIR", str(tmp_path / "logs"))
    assert main(["run", str(short_file), "--csv", str(tmp_path / "m.csv")]) == 0
    out = capsys.readouterr().out
    assert "uptime_fraction" in out and "projection_m_per_sol" in out
    assert (tmp_path / "logs" / "short.jsonl").exists()
    assert (tmp_path / "m.csv").read_text().startswith("metric,unit,value\n")


def test_report_reproduces_run(short_file, tmp_path, capsys):
    log = tmp_path / "run.jsonl"
    assert main(["run", str(short_file), "--log", str(log), "--csv", str(tmp_path / "a.csv")]) == 0
    assert main(["report", str(log), "--csv", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_report_truncated_log(short_file, tmp_path, capsys):
    log = tmp_path / "run.jsonl"
    main(["run", str(short_file), "--log", str(log)])
    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[:-1]) + "\n")
    assert main(["report", str(log)]) == 4
    assert "integrity" in capsys.readouterr().err


def test_validation_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({**SHORT, "detector": {"publish_hz": 7}}))
    assert main(["run", str(f)]) == 2
    assert "detector.publish_hz" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["run", "no/such/file.json"]) == 2


def test_sweep(short_file, tmp_path, capsys):
    assert main(["sweep", str(short_file), "--axis", "gnc.v_cmd_faster", "--values", "0.6,0.7",
                 "--csv", str(tmp_path / "s.csv")]) == 0
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[1].startswith("0.6,3,same,")


def test_collision_exit_code(tmp_path, monkeypatch, capsys):
    # a boulder on the course with a blind detector: the rover drives into it
    doc = {**SHORT, "hazards": [{"center": [12.0, 6.0], "radius": 0.6, "height": 0.4, "kind": "Boulder"}],
           "detector": {"reliability": 0.0, "false_positive_rate": 0.0}}
    f = tmp_path / "blind.json"
    f.write_text(json.dumps(doc))
    monkeypatch.setenv("ROVERSIM_LOG_DIR", str(tmp_path))
    assert main(["run", str(f)]) == 3
    assert "SAFETY FAILURE" in capsys.readouterr().err


def test_scenarios_listing(capsys):
    assert main(["scenarios"]) == 0
    assert "winding_course" in capsys.readouterr().out


def test_shipped_name_resolves():
    assert resolve_scenario("straight_corridor").name == "straight_corridor.json"
    with pytest.raises(ValidationError):
        resolve_scenario("nope")


def test_parse_values():
    assert parse_values("0.7,1.0") == [0.7, 1.0]
    assert parse_values("[1, [2, 3]]") == [1, [2, 3]]
    assert parse_values("baseline,teleop") == ["baseline", "teleop"]
