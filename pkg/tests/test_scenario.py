import json

import pytest

from roversim.errors import ValidationError
from roversim.scenario import load_scenario, scenario_to_dict, set_path

from conftest import COORD_SCENARIOS, NAV_SCENARIOS, scenario_doc

MINIMAL = {"route": {"start": [2, 5], "goal": [20, 5]}}


def test_minimal_defaults():
    sc = load_scenario(MINIMAL)
    assert sc.sim.dt == 0.1
    assert sc.detector.publish_hz == 1.0
    assert sc.gnc.d_stop == 1.5
    assert sc.map.hazard_prob_threshold == 0.7
    assert sc.operation.policy == "autonomous"
    assert sc.document["gnc"]["d_slow"] == 10.0


def test_publish_hz_bound():
    with pytest.raises(ValidationError) as exc:
        load_scenario({**MINIMAL, "detector": {"publish_hz": 7}})
    assert exc.value.path == "detector.publish_hz"
    assert "[1, 5]" in str(exc.value)


def test_stop_slow_ordering():
    with pytest.raises(ValidationError) as exc:
        load_scenario({**MINIMAL, "gnc": {"d_stop": 12, "d_slow": 10}})
    assert exc.value.path == "gnc.d_stop"


@pytest.mark.parametrize("doc,path", [
    ({**MINIMAL, "colour": 1}, "colour"),
    ({**MINIMAL, "gnc": {"v_fast": 1.0}}, "gnc.v_fast"),
    ({**MINIMAL, "sim": {"dt": "fast"}}, "sim.dt"),
    ({**MINIMAL, "sim": {"seed": 1.5}}, "sim.seed"),
    ({"route": {"start": [2, 5], "goal": [2000, 5]}}, "route"),
    ({"route": {"start": [2, 5]}}, "route.route"),
    ({**MINIMAL, "hazards": [{"center": [5, 5], "radius": -1, "height": 0.5, "kind": "Boulder"}]}, "hazards[0].radius"),
    ({**MINIMAL, "coordination": {"agents": [{"id": "a", "role": "Secondary"}]}}, "coordination.agents"),
    ({**MINIMAL, "coordination": {"agents": [{"id": "a", "role": "Leader"}],
                                  "fall_schedule": [{"time": 1, "agent": "b"}]}}, "coordination.fall_schedule[0].agent"),
    ({**MINIMAL, "coordination": {"bus": {"drop_rate": 1.0}}}, "coordination.bus.drop_rate"),
])
def test_errors_name_the_path(doc, path):
    with pytest.raises(ValidationError) as exc:
        load_scenario(doc)
    assert exc.value.path == path


def test_json_text_and_file(tmp_path):
    text = json.dumps(MINIMAL)
    f = tmp_path / "s.json"
    f.write_text(text)
    assert load_scenario(text) == load_scenario(f) == load_scenario(MINIMAL)


@pytest.mark.parametrize("name", NAV_SCENARIOS + COORD_SCENARIOS)
def test_shipped_round_trip(name):
    sc = load_scenario(scenario_doc(name))
    again = load_scenario(json.loads(json.dumps(scenario_to_dict(sc))))
    assert again == sc
    assert again.document == sc.document


def test_set_path():
    doc = set_path(MINIMAL, "gnc.v_cmd_faster", 1.0)
    assert load_scenario(doc).gnc.v_cmd_faster == 1.0
    assert "gnc" not in MINIMAL
    with pytest.raises(ValidationError):
        load_scenario(set_path(MINIMAL, "gnc.no_such_field", 1))
    with pytest.raises(ValidationError):
        set_path({"route": 3}, "route.start.x", 1)


def test_nominal_speed():
    assert load_scenario(MINIMAL).nominal_speed == 0.7
    assert load_scenario({**MINIMAL, "operation": {"policy": "teleop", "teleop_speed": 2.0}}).nominal_speed == 1.2
    assert load_scenario({**MINIMAL, "operation": {"policy": "baseline"}}).nominal_speed == 0.1
