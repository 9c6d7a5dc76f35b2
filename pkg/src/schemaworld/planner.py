"""Placement planning against the microworld.

Two goal shapes are handled.  A support goal asks for a pose of a moving
object such that a focus region of it touches the target and the target
sits beneath it; candidates are screened by simulating the world forward
and keeping poses that stay put.  An unsupport goal asks for a short held
move sequence that breaks an existing support relation.

The focus region is what distinguishes whole-object planning from
part-informed planning: in whole mode every cell of the moving object may
touch the target, in part mode only the cells a trained detector marks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import PlanError
from .geometry import Cell, Mask, below_vote, in_bounds, masks_adjacent, translate
from .parts import DetectorRegistry, detect
from .store import POS, BeliefStore
from .world import ScriptMove, World, render

logger = logging.getLogger(__name__)

DEFAULT_SETTLE_HORIZON = 20


@dataclass(frozen=True)
class PlacementConstraint:
    """Pose filter: focus cells (object-local) must touch the target."""

    object_id: str
    target_id: str
    focus: Mask


@dataclass(frozen=True)
class Plan:
    mode: str
    object_id: str
    target_id: str | None
    pose: Cell | None
    candidate_count: int
    stable: bool
    verdicts: tuple[tuple[Cell, bool], ...] = ()
    script: tuple[ScriptMove, ...] = ()

    def render(self) -> str:
        lines = [
            f"mode {self.mode}",
            f"object {self.object_id}",
            f"target {self.target_id if self.target_id is not None else '-'}",
            f"pose {self.pose[0]},{self.pose[1]}" if self.pose else "pose -",
            f"candidates {self.candidate_count}",
            f"stable {'yes' if self.stable else 'no'}",
        ]
        for pose, ok in self.verdicts:
            lines.append(f"verdict {pose[0]},{pose[1]} {'stable' if ok else 'unstable'}")
        for move in self.script:
            hold = " hold" if move.hold else ""
            lines.append(f"move {move.tick} {move.object_id} {move.move}{hold}")
        return "\n".join(lines) + "\n"


def candidate_poses(world: World, constraint: PlacementConstraint) -> list[Cell]:
    """Row-major scan of every pose satisfying the placement constraint.

    A pose qualifies when the translated object overlaps nothing else, some
    focus cell is 4-adjacent to the target, and the target wins a strict
    below-majority over all touching cell pairs with the whole object.
    """
    spec = world.spec(constraint.object_id)
    world.spec(constraint.target_id)
    if constraint.object_id == constraint.target_id:
        raise PlanError("cannot place an object against itself")
    if not constraint.focus:
        raise PlanError(f"empty focus mask for {constraint.object_id}")
    if not constraint.focus <= spec.cells:
        raise PlanError(f"focus mask leaves the body of {constraint.object_id}")

    target_cells = world.occupied(constraint.target_id)
    blocked = set(world.occupancy(skip=constraint.object_id))
    min_r = min(r for r, _ in spec.cells)
    max_r = max(r for r, _ in spec.cells)
    min_c = min(c for _, c in spec.cells)
    max_c = max(c for _, c in spec.cells)

    out: list[Cell] = []
    for pr in range(-min_r, world.rows - max_r):
        for pc in range(-min_c, world.cols - max_c):
            cells = translate(spec.cells, (pr, pc))
            if cells & blocked:
                continue
            focus_cells = translate(constraint.focus, (pr, pc))
            if not masks_adjacent(focus_cells, target_cells):
                continue
            if not below_vote(target_cells, cells):
                continue
            out.append((pr, pc))
    return out


def _support_goal(goal: tuple) -> tuple[str, str]:
    if len(goal) != 3 or goal[0] != "supportedBy":
        raise PlanError(f"not a support goal: {goal!r}")
    return goal[1], goal[2]


def _unsupport_goal(goal: tuple) -> str:
    if len(goal) != 2 or goal[0] != "removeSupport":
        raise PlanError(f"not an unsupport goal: {goal!r}")
    return goal[1]


def plan_support(
    world: World,
    store: BeliefStore | None,
    goal: tuple,
    mode: str = "whole",
    detectors: DetectorRegistry | None = None,
    settle_horizon: int = DEFAULT_SETTLE_HORIZON,
) -> Plan:
    """Choose a pose that leaves the object resting against the target.

    Every candidate is auditioned by teleporting a copy of the world and
    checking the object holds its pose for ``settle_horizon`` steps.  The
    first stable candidate in scan order wins; if none is stable the plan
    carries the full census with ``stable`` false.
    """
    object_id, target_id = _support_goal(goal)
    spec = world.spec(object_id)
    target_spec = world.spec(target_id)
    if store is not None:
        for entity in (object_id, target_id):
            if not store.has_entity(entity):
                raise PlanError(f"goal names an entity the store does not know: {entity}")

    if mode == "whole":
        focus = spec.cells
    elif mode == "part":
        if detectors is None:
            raise PlanError("part mode needs a detector registry")
        found = detectors.find(spec.class_name, target_spec.class_name)
        if found is None:
            raise PlanError(
                f"no detector for {spec.class_name} parts against {target_spec.class_name}"
            )
        _, model = found
        hits = detect(model, render(world), object_id)
        if not hits:
            raise PlanError(f"detector marked no cells on {object_id}")
        pr, pc = world.pose(object_id)
        focus = frozenset((r - pr, c - pc) for r, c in hits)
    else:
        raise PlanError(f"unknown planning mode: {mode!r}")

    candidates = candidate_poses(world, PlacementConstraint(object_id, target_id, focus))
    if not candidates:
        raise PlanError(f"no pose places {object_id} against {target_id}")

    verdicts = tuple(
        (pose, world.place_object(object_id, pose).is_settled(object_id, settle_horizon))
        for pose in candidates
    )
    for pose, ok in verdicts:
        if ok:
            return Plan(mode, object_id, target_id, pose, len(candidates), True, verdicts)
    logger.info("no stable pose among %d candidates for %s", len(candidates), object_id)
    return Plan(mode, object_id, target_id, None, len(candidates), False, verdicts)


def plan_unsupport(
    world: World,
    store: BeliefStore,
    goal: tuple,
    settle_horizon: int = DEFAULT_SETTLE_HORIZON,
) -> Plan:
    """Plan held moves that detach an object from its believed supporter.

    Lifts until contact with the supporter breaks, then slides sideways
    until no column is shared, stopping early if a slide would collide or
    re-establish contact.  The move sequence is verified by simulation; the
    object ends held, so "detached" may mean hovering clear of the
    supporter rather than resting somewhere new.
    """
    object_id = _unsupport_goal(goal)
    spec = world.spec(object_id)

    supports: set[str] = set()
    for link in store.query_pattern(predicate="suppee", obj=object_id):
        if not store.has(POS, "isa", link.subject, "DSupp"):
            continue
        for upper in store.match_positive("supper", link.subject, None):
            supports.add(upper.object)
    if not supports:
        raise PlanError(f"store holds no support belief for {object_id}")
    supper = sorted(supports)[0]
    if supper not in world.specs:
        raise PlanError(f"believed supporter {supper} is not a world object")

    blocked = set(world.occupancy(skip=object_id))
    supper_cells = world.occupied(supper)
    moves: list[str] = []
    cur = world.pose(object_id)

    def placed(pose: Cell) -> Mask:
        return translate(spec.cells, pose)

    def legal(pose: Cell) -> bool:
        cells = placed(pose)
        return in_bounds(cells, world.rows, world.cols) and not (cells & blocked)

    # lift straight up until the contact breaks
    lifted = not masks_adjacent(placed(cur), supper_cells)
    for _ in range(world.rows):
        if lifted:
            break
        above = (cur[0] - 1, cur[1])
        if not legal(above):
            break
        moves.append("up")
        cur = above
        lifted = not masks_adjacent(placed(cur), supper_cells)
    if not lifted:
        raise PlanError(f"cannot lift {object_id} clear of {supper}")

    # slide away until no column is shared with the supporter
    supper_cols = {c for _, c in supper_cells}

    def overhangs(pose: Cell) -> bool:
        return any(c in supper_cols for _, c in placed(pose))

    if overhangs(cur):
        own_mid = sum(c for _, c in placed(cur)) / len(spec.cells)
        supper_mid = sum(supper_cols) / len(supper_cols)
        step = -1 if own_mid <= supper_mid else 1
        word = "left" if step < 0 else "right"
        for _ in range(world.cols):
            aside = (cur[0], cur[1] + step)
            if not legal(aside) or masks_adjacent(placed(aside), supper_cells):
                logger.info("slide of %s jammed at %s", object_id, cur)
                break
            moves.append(word)
            cur = aside
            if not overhangs(cur):
                break

    script = tuple(
        ScriptMove(world.tick + i, object_id, move, hold=True)
        for i, move in enumerate(moves)
    )
    trial = world.with_script(script)
    for _ in range(len(moves) + settle_horizon):
        trial = trial.step()
    detached = not masks_adjacent(trial.occupied(object_id), trial.occupied(supper))
    return Plan(
        mode="whole",
        object_id=object_id,
        target_id=supper,
        pose=trial.pose(object_id),
        candidate_count=0,
        stable=detached,
        script=script,
    )
