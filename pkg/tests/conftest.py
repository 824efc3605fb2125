import functools
import json
import logging
import sys
from pathlib import Path

import pytest

from roversim import run
from roversim.cli import shipped_scenarios

NAV_SCENARIOS = ["straight_corridor", "hazard_straddle", "winding_course", "teleop_straight",
                 "baseline_conventional", "smooth_path", "rock_field"]
COORD_SCENARIOS = ["emergency_response", "tool_exchange", "coverage_32"]


@pytest.fixture(autouse=True)
def _quiet_map_warnings():
    logging.getLogger("roversim.travmap").setLevel(logging.ERROR)
    yield


def scenario_doc(name: str) -> dict:
    return json.loads(Path(shipped_scenarios()[name]).read_text())


@functools.lru_cache(maxsize=None)
def run_shipped(name: str):
    """Cached (log, report) for a shipped scenario; runs are deterministic."""
    return run(scenario_doc(name))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
