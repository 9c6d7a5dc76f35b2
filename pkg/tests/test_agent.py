"""The agent loop: logging, config parsing, goal servicing, determinism."""

from __future__ import annotations

import json

import pytest

from conftest import MUG_BY_HOOK
from schemaworld.agent import (
    AgentConfig,
    EpisodeLog,
    _ensure_detector,
    concept_from_text,
    load_config,
    parse_config,
    run_loop,
)
from schemaworld.errors import ConfigError, ScenarioError
from schemaworld.parts import DetectorRegistry, ExemplarStore, train_detector
from schemaworld.perception import PerceptionQuery, perceive, sorted_queries
from schemaworld.world import bundled_scenario, render


def hook_scene(mug_pose=(4, 3), goals=()) -> dict:
    data = json.loads(bundled_scenario("mug_on_hook").read_text(encoding="utf-8"))
    for obj in data["objects"]:
        if obj["id"] == "mug1":
            obj["pose"] = list(mug_pose)
    data["goals"] = list(goals)
    return data


def quiet_scene() -> dict:
    """A settled block and no queries: nothing for the loop to do."""
    return {
        "grid": [8, 8],
        "objects": [
            {
                "id": "floor",
                "class": "Floor",
                "fixed": True,
                "pose": [7, 0],
                "cells": [[0, c] for c in range(8)],
            },
            {"id": "b0", "class": "Block", "pose": [6, 3], "cells": [[0, 0]]},
        ],
        "script": [],
        "standing_queries": [],
        "goals": [],
        "annotations": {},
    }


def write_scene(tmp_path, data) -> str:
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def log_entries(episode, kind: str) -> list[tuple[int, str]]:
    out = []
    for line in episode.log.lines:
        tick, k, payload = line.split("\t", 2)
        if k == kind:
            out.append((int(tick), payload))
    return out


# ---------------------------------------------------------------------------
# the episode log


def test_log_line_format_and_hygiene():
    log = EpisodeLog()
    log.add(3, "note", "hello world")
    assert log.lines == ["3\tnote\thello world"]
    assert log.render() == "3\tnote\thello world\n"
    with pytest.raises(ValueError):
        log.add(0, "note", "a\tb")
    with pytest.raises(ValueError):
        log.add(0, "note", "a\nb")


def test_hook_episode_diagnoses_and_learns(hook_episode):
    assert hook_episode.halted == "max-ticks"
    begin = log_entries(hook_episode, "begin")
    assert begin == [(0, "grid 16x11 objects floor,hook1,mug1")]
    derived = [payload for _, payload in log_entries(hook_episode, "derived")]
    assert any("DSupp" in payload for payload in derived)
    assert log_entries(hook_episode, "exemplar")
    assert log_entries(hook_episode, "store")


def test_reports_recompute_from_previous_tick_queries(hook_episode):
    """Queries queued at tick t are exactly what tick t+1 answers."""
    ticks = hook_episode.ticks
    assert len(ticks) >= 5
    for prev, curr in zip(ticks, ticks[1:]):
        again = perceive(render(prev.world), render(curr.world), prev.queries)
        assert again == curr.report


def test_quiescent_halt_without_queries(tmp_path):
    config = AgentConfig(scenario_path=write_scene(tmp_path, quiet_scene()), max_ticks=10)
    episode = run_loop(config)
    assert episode.halted == "quiescent"
    assert len(episode.ticks) == 1
    assert episode.world.tick == 1
    assert log_entries(episode, "halt") == [(1, "quiescent")]
    assert all(payload == "0" for _, payload in log_entries(episode, "percepts"))
    assert not log_entries(episode, "percept")


def test_reruns_are_byte_identical():
    config = AgentConfig(
        scenario_path=str(bundled_scenario("mug_on_hook")),
        concepts=(MUG_BY_HOOK,),
        max_ticks=12,
    )
    first = run_loop(config).log.render()
    second = run_loop(config).log.render()
    assert first == second


def test_extra_queries_keep_the_loop_awake(tmp_path):
    scene = write_scene(tmp_path, quiet_scene())
    episode = run_loop(
        AgentConfig(scenario_path=scene, extra_queries=(("contact", "b0", None),), max_ticks=4)
    )
    assert episode.halted == "max-ticks"
    percepts = [payload for _, payload in log_entries(episode, "percept")]
    assert "pos contacts b0 floor" in percepts
    with pytest.raises(ScenarioError, match="ghost"):
        run_loop(
            AgentConfig(scenario_path=scene, extra_queries=(("contact", "ghost", None),))
        )


# ---------------------------------------------------------------------------
# configuration


def test_parse_config_round_trip(tmp_path):
    text = "\n".join(
        [
            "# agent settings",
            "scenario = scenes/hook.json",
            "rules = default",
            "concept = mug_by_hook:Mug:Hook",
            "detector = mug_by_hook:models/hook.model",
            "standing_query = contact:mug1:_",
            "standing_query = relativeMovement:mug1:floor",
            "max_ticks = 12  # short run",
            "tau = 3",
            "exemplar_dir = out/exemplars",
        ]
    )
    config = parse_config(text)
    assert config.scenario_path == "scenes/hook.json"
    assert config.rules_path is None
    assert config.concepts == (MUG_BY_HOOK,)
    assert config.detector_models == (("mug_by_hook", "models/hook.model"),)
    assert config.extra_queries == (
        ("contact", "mug1", None),
        ("relativeMovement", "mug1", "floor"),
    )
    assert config.max_ticks == 12 and config.tau == 3
    assert config.exemplar_dir == "out/exemplars"

    path = tmp_path / "agent.conf"
    path.write_text(text, encoding="utf-8")
    assert load_config(path) == config

    custom = parse_config("scenario = s.json\nrules = mine.rules\n")
    assert custom.rules_path == "mine.rules"


def test_parse_config_rejects_malformed_lines():
    with pytest.raises(ConfigError, match="missing the scenario"):
        parse_config("max_ticks = 5\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("scenario = s\nwibble = 3\n")
    with pytest.raises(ConfigError, match="integer"):
        parse_config("scenario = s\nmax_ticks = soon\n")
    with pytest.raises(ConfigError, match="key=value"):
        parse_config("scenario\n")
    with pytest.raises(ConfigError, match="query predicate"):
        parse_config("scenario = s\nstanding_query = teleport:a:b\n")
    with pytest.raises(ConfigError, match="predicate:subject:object"):
        parse_config("scenario = s\nstanding_query = contact:a\n")
    with pytest.raises(ConfigError, match="name:path"):
        parse_config("scenario = s\ndetector = nameonly\n")


def test_concept_from_text_variants():
    assert concept_from_text("mug_by_hook:Mug:Hook") == MUG_BY_HOOK
    full = concept_from_text("c2:Mug:Hook:DSupp:supper")
    assert full.host_role == "supper" and full.partner_role == "suppee"
    with pytest.raises(ConfigError, match="name:host:partner"):
        concept_from_text("a:b:c:d")


# ---------------------------------------------------------------------------
# goal servicing


def test_support_goal_places_whole_mode(tmp_path):
    scene = hook_scene(
        mug_pose=(8, 0),
        goals=[{"kind": "support", "object": "mug1", "target": "hook1"}],
    )
    episode = run_loop(AgentConfig(scenario_path=write_scene(tmp_path, scene), max_ticks=8))
    placed = log_entries(episode, "placed")
    assert placed == [(1, "mug1 0,3")]
    assert any(payload == "mode whole" for _, payload in log_entries(episode, "plan"))
    assert episode.world.pose("mug1") == (0, 3)
    # the placement is rediagnosed as support within three ticks
    derived = log_entries(episode, "derived")
    dsupp_ticks = [tick for tick, payload in derived if "DSupp" in payload]
    assert dsupp_ticks and min(dsupp_ticks) <= 1 + 3


def test_support_goal_prefers_part_mode_with_detector(tmp_path, hook_model):
    model_path = tmp_path / "hook.model"
    hook_model.save(model_path)
    scene = hook_scene(
        mug_pose=(8, 0),
        goals=[{"kind": "support", "object": "mug1", "target": "hook1"}],
    )
    episode = run_loop(
        AgentConfig(
            scenario_path=write_scene(tmp_path, scene),
            concepts=(MUG_BY_HOOK,),
            detector_models=(("mug_by_hook", str(model_path)),),
            max_ticks=8,
        )
    )
    assert log_entries(episode, "placed") == [(1, "mug1 6,3")]
    plans = [payload for _, payload in log_entries(episode, "plan")]
    assert "mode part" in plans
    assert episode.world.pose("mug1") == (6, 3)


def test_unsupport_goal_retries_until_diagnosed(tmp_path):
    scene = hook_scene(mug_pose=(5, 3), goals=[{"kind": "unsupport", "object": "mug1"}])
    # drop the hook so the mug falls straight to the floor
    scene["objects"] = [o for o in scene["objects"] if o["id"] != "hook1"]
    episode = run_loop(AgentConfig(scenario_path=write_scene(tmp_path, scene), max_ticks=12))
    errors = log_entries(episode, "plan-error")
    assert errors and all("no support belief" in payload for _, payload in errors)
    assert {tick for tick, _ in errors} == {1, 2, 3}
    plans = [payload for _, payload in log_entries(episode, "plan")]
    assert "move 4 mug1 up hold" in plans
    assert episode.world.pose("mug1") == (7, 0)
    assert "mug1" in episode.world.held


def test_lazy_detector_training_from_exemplars(hook_episode):
    config = AgentConfig(scenario_path="unused", concepts=(MUG_BY_HOOK,))
    registry = DetectorRegistry()
    assert _ensure_detector(registry, config, hook_episode.exemplars, "Mug", "Hook")
    found = registry.find("Mug", "Hook")
    assert found is not None
    assert found[1] == train_detector(hook_episode.exemplars)
    # second call finds the registered model and does nothing
    assert not _ensure_detector(registry, config, hook_episode.exemplars, "Mug", "Hook")
    # no exemplars or no concept definition: nothing to train from
    assert not _ensure_detector(DetectorRegistry(), config, [], "Mug", "Hook")
    assert not _ensure_detector(
        DetectorRegistry(), AgentConfig(scenario_path="unused"), hook_episode.exemplars,
        "Mug", "Hook",
    )


def test_exemplar_dir_collects_captures(tmp_path):
    out = tmp_path / "captured"
    config = AgentConfig(
        scenario_path=str(bundled_scenario("mug_on_hook")),
        concepts=(MUG_BY_HOOK,),
        max_ticks=8,
        exemplar_dir=str(out),
    )
    episode = run_loop(config)
    saved = ExemplarStore(out).load_all()
    assert saved == sorted(episode.exemplars, key=lambda e: e.tick)
    assert len(saved) >= 1


def test_detector_model_requires_matching_concept(tmp_path, hook_model):
    model_path = tmp_path / "hook.model"
    hook_model.save(model_path)
    config = AgentConfig(
        scenario_path=str(bundled_scenario("mug_on_hook")),
        detector_models=(("mug_by_hook", str(model_path)),),
    )
    with pytest.raises(ConfigError, match="no matching concept"):
        run_loop(config)


def test_initial_queries_come_from_the_scenario(hook_episode):
    queries = log_entries(hook_episode, "queries")
    assert queries[0][0] == 0
    expected = sorted_queries(
        [
            PerceptionQuery("contact", "mug1", None),
            PerceptionQuery("relativeMovement", "mug1", "floor"),
        ]
    )
    assert queries[0][1] == "; ".join(q.render() for q in expected)
