"""Microworld: stepping, settling, rendering, scenario validation."""

from __future__ import annotations

import json
import random

import pytest

from schemaworld.errors import ScenarioError
from schemaworld.geometry import in_bounds, translate
from schemaworld.world import (
    ObjectSpec,
    ScriptMove,
    World,
    bundled_scenario,
    load_scenario,
    load_scenario_file,
    render,
)


def tiny_scenario(extra_objects=(), script=(), grid=(8, 8)) -> dict:
    rows, cols = grid
    return {
        "grid": [rows, cols],
        "objects": [
            {
                "id": "floor",
                "class": "Floor",
                "fixed": True,
                "pose": [rows - 1, 0],
                "cells": [[0, c] for c in range(cols)],
            },
            *extra_objects,
        ],
        "script": list(script),
        "standing_queries": [],
        "goals": [],
        "annotations": {},
    }


def block(object_id="b0", pose=(4, 3), cells=((0, 0),)) -> dict:
    return {
        "id": object_id,
        "class": "Block",
        "pose": list(pose),
        "cells": [list(c) for c in cells],
    }


def world_from(data: dict) -> World:
    return load_scenario(json.dumps(data))


# ---------------------------------------------------------------------------
# stepping


def test_block_falls_three_steps_then_rests():
    world = world_from(tiny_scenario([block(pose=(3, 3))]))
    heights = []
    for _ in range(5):
        heights.append(world.pose("b0")[0])
        world = world.step()
    assert heights == [3, 4, 5, 6, 6]
    assert world.is_settled("b0", 1)
    assert world.is_settled("b0", 20)


def test_mug_comes_to_rest_hanging_on_hook(hook_world):
    world = hook_world
    for _ in range(6):
        world = world.step()
    assert world.pose("mug1") == (6, 3)
    assert world.is_settled("mug1", 20)
    # the hook cell ends up inside the ring hole, not overlapping the mug
    hook_cell = next(iter(world.occupied("hook1")))
    assert hook_cell not in world.occupied("mug1")


def test_fixed_object_ignores_script_and_gravity():
    data = tiny_scenario([block()], script=[{"tick": 0, "object": "floor", "move": "left"}])
    world = world_from(data)
    for _ in range(4):
        world = world.step()
        assert world.pose("floor") == (7, 0)


def test_scripted_move_applies_and_blocked_move_is_skipped():
    data = tiny_scenario(
        [block(pose=(6, 0))],
        script=[
            {"tick": 0, "object": "b0", "move": "left"},  # into the wall
            {"tick": 1, "object": "b0", "move": "right"},
        ],
    )
    world = world_from(data)
    stepped = world.step()  # blocked; already resting on the floor
    assert stepped.pose("b0") == (6, 0)
    assert stepped.step().pose("b0") == (6, 1)


def test_hold_suppresses_gravity():
    data = tiny_scenario(
        [block(pose=(3, 3))],
        script=[{"tick": 0, "object": "b0", "move": "up", "hold": True}],
    )
    world = world_from(data).step()
    assert world.pose("b0") == (2, 3)
    assert "b0" in world.held
    for _ in range(3):
        world = world.step()
        assert world.pose("b0") == (2, 3)  # hovering while held


def test_loader_rejects_unknown_script_object():
    data = tiny_scenario([block()], script=[{"tick": 0, "object": "ghost", "move": "up"}])
    with pytest.raises(ScenarioError, match="ghost"):
        world_from(data)


def test_step_tolerates_stray_script_entries():
    # scripts attached after loading may name objects that have gone away
    base = world_from(tiny_scenario([block(pose=(6, 3))]))
    world = base.with_script((ScriptMove(0, "ghost", "up"),))
    assert world.step().pose("b0") == (6, 3)  # logged, not fatal


def test_overhanging_plank_slides_off_its_perch():
    # plank's mass centre lies right of its single support column
    data = tiny_scenario(
        [
            block("pedestal", pose=(6, 1), cells=((0, 0),)),
            block("plank", pose=(5, 1), cells=((0, 0), (0, 1), (0, 2))),
        ]
    )
    world = world_from(data)
    world = world.step()
    assert world.pose("plank") == (5, 2)  # slid toward the heavy side
    for _ in range(4):
        world = world.step()
    assert world.pose("plank")[0] == 6  # ends on the floor
    assert world.all_settled(1)


def test_is_settled_validates_arguments():
    world = world_from(tiny_scenario([block(pose=(2, 2))]))
    assert not world.is_settled("b0", 1)
    with pytest.raises(ScenarioError):
        world.is_settled("b0", 0)
    with pytest.raises(ScenarioError):
        world.is_settled("ghost", 1)


def test_is_settled_does_not_mutate():
    world = world_from(tiny_scenario([block(pose=(2, 2))]))
    before = world.pose("b0")
    world.is_settled("b0", 10)
    assert world.pose("b0") == before and world.tick == 0


# ---------------------------------------------------------------------------
# placement and scripting helpers


def test_place_object_checks_bounds_and_overlap():
    world = world_from(tiny_scenario([block(pose=(4, 3)), block("b1", pose=(6, 6))]))
    moved = world.place_object("b0", (6, 2))
    assert moved.pose("b0") == (6, 2)
    assert world.pose("b0") == (4, 3)  # original untouched
    with pytest.raises(ScenarioError):
        world.place_object("b0", (9, 0))
    with pytest.raises(ScenarioError):
        world.place_object("b0", (6, 6))
    with pytest.raises(ScenarioError):
        world.place_object("ghost", (0, 0))


def test_with_script_appends_moves():
    world = world_from(tiny_scenario([block()]))
    move = ScriptMove(2, "b0", "left", hold=False)
    assert world.with_script((move,)).script[-1] == move


# ---------------------------------------------------------------------------
# rendering


def test_render_masks_partition_and_counts(hook_world):
    frame = render(hook_world)
    assert sorted(frame.masks) == ["floor", "hook1", "mug1"]
    assert len(frame.masks["floor"]) == 11
    assert len(frame.masks["hook1"]) == 1
    assert len(frame.masks["mug1"]) == 26
    union = set()
    total = 0
    for mask in frame.masks.values():
        union |= mask
        total += len(mask)
    assert len(union) == total  # no cell has two labels
    assert frame.classes["mug1"] == "Mug"


def test_render_is_reproducible(hook_world):
    assert render(hook_world) == render(hook_world)
    grid = render(hook_world).label_grid()
    assert len(grid) == hook_world.rows
    assert all(len(row) == hook_world.cols for row in grid)
    assert render(hook_world).ascii()  # non-empty drawing


def test_frame_mask_unknown_object(hook_world):
    with pytest.raises(ScenarioError):
        render(hook_world).mask("ghost")


# ---------------------------------------------------------------------------
# scenario validation


def test_load_rejects_overlapping_objects():
    data = tiny_scenario([block("b0", pose=(4, 3)), block("b1", pose=(4, 3))])
    with pytest.raises(ScenarioError, match="overlap"):
        world_from(data)


def test_load_rejects_disconnected_cells():
    data = tiny_scenario([block(cells=((0, 0), (2, 2)))])
    with pytest.raises(ScenarioError):
        world_from(data)


def test_load_rejects_mug_without_hole():
    data = tiny_scenario([block()])
    data["objects"][1]["class"] = "Mug"
    with pytest.raises(ScenarioError):
        world_from(data)


def test_load_rejects_missing_or_partial_floor():
    data = tiny_scenario()
    data["objects"] = []
    with pytest.raises(ScenarioError):
        world_from(data)
    data = tiny_scenario()
    data["objects"][0]["cells"] = [[0, c] for c in range(4)]
    with pytest.raises(ScenarioError):
        world_from(data)


def test_load_rejects_unknown_class_and_bad_query():
    data = tiny_scenario([block()])
    data["objects"][1]["class"] = "Widget"
    with pytest.raises(ScenarioError):
        world_from(data)
    data = tiny_scenario([block()])
    data["standing_queries"] = [{"predicate": "teleport", "subject": "b0", "object": "_"}]
    with pytest.raises(ScenarioError):
        world_from(data)


def test_load_parses_queries_goals_annotations():
    data = tiny_scenario([block()])
    data["standing_queries"] = [
        {"predicate": "contact", "subject": "b0", "object": "_"},
        {"predicate": "relativeMovement", "subject": "b0", "object": "floor"},
    ]
    data["goals"] = [{"kind": "support", "object": "b0", "target": "floor"}]
    data["annotations"] = {"spot": {"object": "b0", "cells": [[0, 0]]}}
    world = world_from(data)
    assert ("contact", "b0", None) in world.standing_queries
    assert ("relativeMovement", "b0", "floor") in world.standing_queries
    assert world.goals[0].kind == "support"
    name, mask = world.annotation_mask("spot")
    assert name == "b0" and mask == world.occupied("b0")


def test_bundled_scenarios_exist():
    for name in ("mug_on_hook", "mug_on_floor", "block_stack"):
        load_scenario_file(bundled_scenario(name))
    with pytest.raises(ScenarioError, match="mug_on_hook"):
        bundled_scenario("nope")


# ---------------------------------------------------------------------------
# randomized invariants


SHAPES = (
    ((0, 0),),
    ((0, 0), (0, 1)),
    ((0, 0), (1, 0)),
    ((0, 0), (0, 1), (1, 0), (1, 1)),
    ((0, 0), (0, 1), (0, 2)),
)


def random_world(rng: random.Random) -> World:
    rows, cols = rng.randint(6, 10), rng.randint(6, 10)
    floor = ObjectSpec("floor", "Floor", frozenset((0, c) for c in range(cols)), fixed=True)
    specs = {"floor": floor}
    poses = {"floor": (rows - 1, 0)}
    taken = set(translate(floor.cells, poses["floor"]))
    for i in range(rng.randint(1, 4)):
        cells = frozenset(rng.choice(SHAPES))
        for _ in range(20):
            pose = (rng.randint(0, rows - 4), rng.randint(0, cols - 4))
            placed = translate(cells, pose)
            if in_bounds(placed, rows, cols) and not placed & taken:
                oid = f"r{i}"
                specs[oid] = ObjectSpec(oid, "Block", cells)
                poses[oid] = pose
                taken |= placed
                break
    return World(rows=rows, cols=cols, specs=specs, poses=poses)


def test_random_worlds_step_invariants():
    rng = random.Random(29)
    for _ in range(30):
        world = random_world(rng)
        twin = World(
            rows=world.rows, cols=world.cols, specs=dict(world.specs), poses=dict(world.poses)
        )
        prev_rows = {o: world.pose(o)[0] for o in world.object_ids()}
        settled_at = None
        for step in range(16):
            world = world.step()
            twin = twin.step()
            assert world.poses == twin.poses  # determinism
            seen = set()
            for oid in world.object_ids():
                cells = world.occupied(oid)
                assert not cells & seen  # no overlap after stepping
                seen |= cells
                assert in_bounds(cells, world.rows, world.cols)
                row = world.pose(oid)[0]
                assert row >= prev_rows[oid]  # nothing ever rises
                prev_rows[oid] = row
            if settled_at is None and world.all_settled(1):
                settled_at = dict(world.poses)
            elif settled_at is not None:
                assert world.poses == settled_at  # quiescence is absorbing
        assert settled_at is not None  # small worlds settle inside the budget
