"""Deterministic 2D grid microworld.

Row 0 is the top of the grid, so gravity increases row indices.  Worlds are
immutable snapshots: ``step`` returns a new value, which lets the planner
forward-simulate candidate placements on copies without bookkeeping.

The step rule is: scripted unit moves first (rejected, not clamped, when
they would collide), then each non-fixed, non-held object falls one cell
unless blocked, resolved bottom-most first.  A blocked object whose column
of support lies entirely to one side of its center of mass slides one cell
toward the heavy side; if that slide collides it stays put (wedged counts
as supported).  The slide is what makes off-center perches fall over
instead of hovering on a corner.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .errors import ScenarioError
from .geometry import Cell, Mask, enclosed_holes, in_bounds, is_connected, translate
from .vocab import CLASSES, FLOOR_ID

logger = logging.getLogger(__name__)

MOVE_DELTAS: dict[str, Cell] = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
}


@dataclass(frozen=True)
class ObjectSpec:
    """Shape and identity of one object; cells are local (row, col) offsets."""

    object_id: str
    class_name: str
    cells: Mask
    fixed: bool = False


@dataclass(frozen=True)
class ScriptMove:
    tick: int
    object_id: str
    move: str
    hold: bool = False


@dataclass(frozen=True)
class Goal:
    kind: str  # "support" | "unsupport"
    object_id: str
    target: str | None = None


@dataclass(frozen=True)
class Frame:
    """Rendered snapshot: per-object ground-truth masks plus class labels."""

    tick: int
    rows: int
    cols: int
    masks: dict[str, Mask]
    classes: dict[str, str]

    def mask(self, object_id: str) -> Mask:
        try:
            return self.masks[object_id]
        except KeyError:
            raise ScenarioError(f"unknown object: {object_id!r}") from None

    def label_grid(self) -> tuple[tuple[str, ...], ...]:
        grid = [["" for _ in range(self.cols)] for _ in range(self.rows)]
        for object_id in sorted(self.masks):
            for r, c in self.masks[object_id]:
                grid[r][c] = object_id
        return tuple(tuple(row) for row in grid)

    def ascii(self) -> str:
        """One printable char per cell; legend line first."""
        ids = sorted(self.masks)
        symbol = {FLOOR_ID: "#"}
        letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
        next_letter = 0
        for object_id in ids:
            if object_id not in symbol:
                symbol[object_id] = letters[next_letter % len(letters)]
                next_letter += 1
        legend = " ".join(f"{symbol[i]}={i}" for i in ids)
        grid = [["." for _ in range(self.cols)] for _ in range(self.rows)]
        for object_id in ids:
            for r, c in self.masks[object_id]:
                grid[r][c] = symbol[object_id]
        return "\n".join([legend] + ["".join(row) for row in grid])


@dataclass(frozen=True)
class World:
    rows: int
    cols: int
    specs: dict[str, ObjectSpec]
    poses: dict[str, Cell]
    tick: int = 0
    script: tuple[ScriptMove, ...] = ()
    held: frozenset[str] = frozenset()
    standing_queries: tuple[tuple[str, str, str | None], ...] = ()
    goals: tuple[Goal, ...] = ()
    annotations: dict[str, tuple[str, Mask]] = field(default_factory=dict)

    # -- accessors ----------------------------------------------------------

    def object_ids(self) -> list[str]:
        return sorted(self.specs)

    def spec(self, object_id: str) -> ObjectSpec:
        try:
            return self.specs[object_id]
        except KeyError:
            raise ScenarioError(f"unknown object: {object_id!r}") from None

    def pose(self, object_id: str) -> Cell:
        self.spec(object_id)
        return self.poses[object_id]

    def occupied(self, object_id: str) -> Mask:
        return translate(self.spec(object_id).cells, self.poses[object_id])

    def occupancy(self, skip: str | None = None) -> dict[Cell, str]:
        cells: dict[Cell, str] = {}
        for object_id in self.object_ids():
            if object_id == skip:
                continue
            for cell in self.occupied(object_id):
                cells[cell] = object_id
        return cells

    def annotation_mask(self, name: str) -> tuple[str, Mask]:
        """Annotated region translated to the object's current pose."""
        object_id, local = self.annotations[name]
        return object_id, translate(local, self.poses[object_id])

    # -- stepping -----------------------------------------------------------

    def step(self) -> "World":
        poses = dict(self.poses)
        held = set(self.held)

        def others(object_id: str) -> set[Cell]:
            out: set[Cell] = set()
            for other in self.specs:
                if other != object_id:
                    out.update(translate(self.specs[other].cells, poses[other]))
            return out

        def fits(object_id: str, pose: Cell) -> bool:
            cells = translate(self.specs[object_id].cells, pose)
            return in_bounds(cells, self.rows, self.cols) and not (cells & others(object_id))

        # scripted moves, in file order
        for move in self.script:
            if move.tick != self.tick:
                continue
            if move.object_id not in self.specs:
                logger.warning("script names unknown object %s", move.object_id)
                continue
            if self.specs[move.object_id].fixed:
                logger.info("script move on fixed object %s ignored", move.object_id)
                continue
            if move.hold:
                held.add(move.object_id)
            else:
                held.discard(move.object_id)
            dr, dc = MOVE_DELTAS[move.move]
            r, c = poses[move.object_id]
            target = (r + dr, c + dc)
            if fits(move.object_id, target):
                poses[move.object_id] = target
            else:
                logger.info(
                    "script move %s %s at tick %d blocked",
                    move.object_id,
                    move.move,
                    self.tick,
                )

        # gravity, bottom-most objects first so stacks settle consistently
        movable = [
            object_id
            for object_id in self.specs
            if not self.specs[object_id].fixed and object_id not in held
        ]
        order = sorted(
            movable,
            key=lambda i: (
                -max(r for r, _ in translate(self.specs[i].cells, poses[i])),
                i,
            ),
        )
        fell: set[str] = set()
        for object_id in order:
            r, c = poses[object_id]
            if fits(object_id, (r + 1, c)):
                poses[object_id] = (r + 1, c)
                fell.add(object_id)

        # supported but off-balance objects slide toward their heavy side
        for object_id in order:
            if object_id in fell:
                continue
            cells = translate(self.specs[object_id].cells, poses[object_id])
            blockers = others(object_id)
            support_cols = sorted(
                c for r, c in cells if (r + 1, c) in blockers
            )
            if not support_cols:
                continue  # resting on the grid edge is not a perch
            mean_col = sum(c for _, c in cells) / len(cells)
            if mean_col < support_cols[0]:
                direction = -1
            elif mean_col > support_cols[-1]:
                direction = 1
            else:
                continue
            r, c = poses[object_id]
            if fits(object_id, (r, c + direction)):
                poses[object_id] = (r, c + direction)

        return replace(
            self, poses=poses, held=frozenset(held), tick=self.tick + 1
        )

    def is_settled(self, object_id: str, k: int) -> bool:
        """True iff the object's pose is invariant over k simulated steps."""
        self.spec(object_id)
        if k < 1:
            raise ScenarioError("settle horizon must be >= 1")
        pose = self.poses[object_id]
        world = self
        for _ in range(k):
            world = world.step()
            if world.poses[object_id] != pose:
                return False
        return True

    def all_settled(self, k: int) -> bool:
        return all(
            self.is_settled(object_id, k)
            for object_id in self.object_ids()
            if not self.specs[object_id].fixed
        )

    def place_object(self, object_id: str, pose: Cell) -> "World":
        """Teleport an object; errors rather than creating an overlap."""
        spec = self.spec(object_id)
        cells = translate(spec.cells, pose)
        if not in_bounds(cells, self.rows, self.cols):
            raise ScenarioError(f"placement of {object_id} out of bounds: {pose}")
        blockers = set(self.occupancy(skip=object_id))
        if cells & blockers:
            raise ScenarioError(f"placement of {object_id} overlaps at {pose}")
        poses = dict(self.poses)
        poses[object_id] = pose
        return replace(self, poses=poses)

    def with_script(self, moves: tuple[ScriptMove, ...]) -> "World":
        return replace(self, script=self.script + tuple(moves))


def render(world: World) -> Frame:
    return Frame(
        tick=world.tick,
        rows=world.rows,
        cols=world.cols,
        masks={i: world.occupied(i) for i in world.object_ids()},
        classes={i: world.specs[i].class_name for i in world.object_ids()},
    )


# -- scenario files -----------------------------------------------------------


def _parse_cells(raw, what: str) -> Mask:
    try:
        cells = frozenset((int(r), int(c)) for r, c in raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what}: cells must be [row, col] pairs") from None
    if not cells:
        raise ScenarioError(f"{what}: empty cell set")
    return cells


def load_scenario(text: str) -> World:
    """Parse and validate a scenario JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None

    try:
        rows, cols = (int(x) for x in doc["grid"])
        raw_objects = doc["objects"]
    except (KeyError, TypeError, ValueError):
        raise ScenarioError("scenario needs 'grid': [rows, cols] and 'objects'") from None
    if rows < 2 or cols < 1:
        raise ScenarioError(f"grid too small: {rows}x{cols}")

    specs: dict[str, ObjectSpec] = {}
    poses: dict[str, Cell] = {}
    for raw in raw_objects:
        object_id = raw.get("id", "")
        if not object_id or object_id in specs:
            raise ScenarioError(f"missing or duplicate object id: {object_id!r}")
        class_name = raw.get("class", "")
        if class_name not in CLASSES:
            raise ScenarioError(f"object {object_id}: unknown class {class_name!r}")
        cells = _parse_cells(raw.get("cells", ()), f"object {object_id}")
        if not is_connected(cells):
            raise ScenarioError(f"object {object_id}: cells are not 4-connected")
        if class_name == "Mug" and not enclosed_holes(cells):
            raise ScenarioError(
                f"object {object_id}: a Mug needs a closed handle ring "
                "(no enclosed hole found)"
            )
        try:
            pose = (int(raw["pose"][0]), int(raw["pose"][1]))
        except (KeyError, TypeError, ValueError, IndexError):
            raise ScenarioError(f"object {object_id}: bad pose") from None
        specs[object_id] = ObjectSpec(
            object_id, class_name, cells, bool(raw.get("fixed", False))
        )
        poses[object_id] = pose
        occupied = translate(cells, pose)
        if not in_bounds(occupied, rows, cols):
            raise ScenarioError(f"object {object_id}: out of bounds at {pose}")

    if FLOOR_ID not in specs:
        raise ScenarioError(f"scenario has no {FLOOR_ID!r} object")
    floor_cells = translate(specs[FLOOR_ID].cells, poses[FLOOR_ID])
    if not specs[FLOOR_ID].fixed or floor_cells != frozenset(
        (rows - 1, c) for c in range(cols)
    ):
        raise ScenarioError("floor must be fixed and span the whole bottom row")

    seen: dict[Cell, str] = {}
    for object_id in sorted(specs):
        for cell in translate(specs[object_id].cells, poses[object_id]):
            if cell in seen:
                raise ScenarioError(
                    f"objects {seen[cell]} and {object_id} overlap at {cell}"
                )
            seen[cell] = object_id

    script = []
    for raw in doc.get("script", ()):
        move = raw.get("move")
        if move not in MOVE_DELTAS:
            raise ScenarioError(f"script move must be one of {sorted(MOVE_DELTAS)}")
        if raw.get("object") not in specs:
            raise ScenarioError(f"script names unknown object {raw.get('object')!r}")
        script.append(
            ScriptMove(
                int(raw.get("tick", 0)), raw["object"], move, bool(raw.get("hold", False))
            )
        )

    queries = []
    for raw in doc.get("standing_queries", ()):
        predicate = raw.get("predicate")
        if predicate not in ("relativeMovement", "contact"):
            raise ScenarioError(f"unknown query predicate {predicate!r}")
        subject = raw.get("subject")
        if subject not in specs:
            raise ScenarioError(f"query subject {subject!r} is not an object")
        obj = raw.get("object")
        if obj in ("_", ""):
            obj = None
        if obj is not None and obj not in specs:
            raise ScenarioError(f"query object {obj!r} is not an object")
        queries.append((predicate, subject, obj))

    goals = []
    for raw in doc.get("goals", ()):
        kind = raw.get("kind")
        if kind not in ("support", "unsupport"):
            raise ScenarioError(f"goal kind must be support or unsupport, not {kind!r}")
        object_id = raw.get("object")
        if object_id not in specs:
            raise ScenarioError(f"goal object {object_id!r} is not an object")
        target = raw.get("target")
        if kind == "support" and target not in specs:
            raise ScenarioError(f"goal target {target!r} is not an object")
        goals.append(Goal(kind, object_id, target))

    annotations: dict[str, tuple[str, Mask]] = {}
    for name, raw in doc.get("annotations", {}).items():
        object_id = raw.get("object")
        if object_id not in specs:
            raise ScenarioError(f"annotation {name}: unknown object {object_id!r}")
        annotations[name] = (object_id, _parse_cells(raw.get("cells", ()), f"annotation {name}"))

    return World(
        rows=rows,
        cols=cols,
        specs=specs,
        poses=poses,
        script=tuple(script),
        standing_queries=tuple(queries),
        goals=tuple(goals),
        annotations=annotations,
    )


def load_scenario_file(path) -> World:
    return load_scenario(Path(path).read_text(encoding="utf-8"))


def bundled_scenario(name: str) -> Path:
    """Path to a scenario shipped with the package, by bare name."""
    root = resources.files("schemaworld").joinpath("assets/scenarios")
    path = Path(str(root.joinpath(f"{name}.json")))
    if not path.is_file():
        known = sorted(p.stem for p in Path(str(root)).glob("*.json"))
        raise ScenarioError(f"no bundled scenario {name!r}; have: {', '.join(known)}")
    return path
