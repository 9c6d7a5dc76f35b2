"""Shared fixtures plus a per-criterion summary for the acceptance suite."""

from __future__ import annotations

import pytest

from schemaworld.agent import AgentConfig, run_loop
from schemaworld.parts import ConceptDef, train_detector
from schemaworld.world import bundled_scenario, load_scenario_file

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call":
        _ACCEPTANCE[report.nodeid] = report.outcome
    elif report.outcome != "passed":
        # setup/teardown error or skip; call never happened
        _ACCEPTANCE.setdefault(report.nodeid, report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE):
        word = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            _ACCEPTANCE[nodeid], _ACCEPTANCE[nodeid].upper()
        )
        terminalreporter.write_line(f"{word}  {nodeid.split('::')[-1]}")


MUG_BY_HOOK = ConceptDef("mug_by_hook", "Mug", "Hook")


@pytest.fixture(scope="session")
def hook_episode():
    """Thirty ticks of the hanging-mug scene with part capture on."""
    config = AgentConfig(
        scenario_path=bundled_scenario("mug_on_hook"),
        concepts=(MUG_BY_HOOK,),
        max_ticks=30,
    )
    return run_loop(config)


@pytest.fixture(scope="session")
def hook_model(hook_episode):
    return train_detector(hook_episode.exemplars)


@pytest.fixture(scope="session")
def hook_world():
    return load_scenario_file(bundled_scenario("mug_on_hook"))


@pytest.fixture(scope="session")
def floor_world():
    return load_scenario_file(bundled_scenario("mug_on_floor"))


@pytest.fixture(scope="session")
def stack_world():
    return load_scenario_file(bundled_scenario("block_stack"))
