"""Learning and detecting object parts from contact evidence.

A part concept names a recurring role in a diagnosed situation (for the
bundled ruleset: the region of a supported object that touches its
supporter).  Whenever the current belief store contains a full structural
match for the concept, an exemplar is cut out of the host's occupancy mask
and remembered.  A detector trained on exemplars is a nearest-descriptor
classifier over small binary occupancy patches, so detection is exactly
translation equivariant by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import ConceptError
from .geometry import Cell, Mask, mask_to_rle, rle_to_mask
from .perception import PerceptReport
from .store import POS, BeliefStore
from .vocab import CLASSES
from .world import Frame

logger = logging.getLogger(__name__)

DEFAULT_PATCH_RADIUS = 2
DEFAULT_TAU = 2

# A patch is the host-mask occupancy of the (2r+1)^2 window around a cell,
# flattened row-major into a bit tuple.
Patch = tuple[int, ...]

_ROLE_PARTNER = {"suppee": "supper", "supper": "suppee"}


@dataclass(frozen=True)
class ConceptDef:
    """What to look for in the store before cutting out an exemplar."""

    name: str
    host_class: str
    partner_class: str
    situation_kind: str = "DSupp"
    host_role: str = "suppee"

    def __post_init__(self) -> None:
        if not self.name or any(ch.isspace() for ch in self.name):
            raise ConceptError(f"bad concept name: {self.name!r}")
        for cls in (self.host_class, self.partner_class, self.situation_kind):
            if cls not in CLASSES:
                raise ConceptError(f"unknown class in concept {self.name}: {cls}")
        if self.host_role not in _ROLE_PARTNER:
            raise ConceptError(f"unknown host role: {self.host_role}")

    @property
    def partner_role(self) -> str:
        return _ROLE_PARTNER[self.host_role]


@dataclass(frozen=True)
class Exemplar:
    """One observed instance of a part, in frame coordinates."""

    concept: str
    tick: int
    object_id: str
    part_mask: Mask
    host_mask: Mask

    def __post_init__(self) -> None:
        if not self.part_mask or not self.part_mask <= self.host_mask:
            raise ConceptError("part mask must be a non-empty subset of the host mask")

    def render(self) -> str:
        lines = [
            f"concept {self.concept}",
            f"tick {self.tick}",
            f"object {self.object_id}",
            f"part {mask_to_rle(self.part_mask)}",
            f"host {mask_to_rle(self.host_mask)}",
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str) -> "Exemplar":
        fields: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            key, _, value = line.partition(" ")
            fields[key] = value
        try:
            return Exemplar(
                concept=fields["concept"],
                tick=int(fields["tick"]),
                object_id=fields["object"],
                part_mask=rle_to_mask(fields["part"]),
                host_mask=rle_to_mask(fields["host"]),
            )
        except KeyError as exc:
            raise ConceptError(f"exemplar text missing field: {exc}") from exc


def capture_exemplar(
    store: BeliefStore,
    report: PerceptReport,
    frame: Frame,
    concept: ConceptDef,
) -> Exemplar | None:
    """Cut an exemplar out of the frame if the store matches the concept.

    The structural pattern is checked entirely against derived beliefs: a
    situation of the right kind whose role fillers have the right classes,
    a contact situation joining the partner with a part of the host, and
    the part sitting above the partner.  The part's extent is then the
    recorded contact mask intersected with the host's occupancy.  Returns
    None when nothing matches this tick.
    """
    for situation in sorted(
        t.subject for t in store.query_pattern(predicate="isa", obj=concept.situation_kind)
    ):
        hosts = [t.object for t in store.match_positive(concept.host_role, situation, None)]
        partners = [t.object for t in store.match_positive(concept.partner_role, situation, None)]
        if len(hosts) != 1 or len(partners) != 1:
            continue
        host, partner = hosts[0], partners[0]
        if not store.has(POS, "isa", host, concept.host_class):
            continue
        if not store.has(POS, "isa", partner, concept.partner_class):
            continue
        part = _matched_part(store, host, partner)
        if part is None:
            continue
        contact = report.contact_masks.get((host, partner))
        if contact is None:
            contact = report.contact_masks.get((partner, host))
        if contact is None:
            continue
        part_mask = frozenset(contact) & frame.mask(host)
        if not part_mask:
            continue
        return Exemplar(concept.name, frame.tick, host, part_mask, frame.mask(host))
    return None


def _matched_part(store: BeliefStore, host: str, partner: str) -> str | None:
    # The part must be a known piece of the host, above the partner, and a
    # participant in a contact situation that also involves the partner.
    for triple in store.match_positive("hasPrt", host, None):
        part = triple.object
        if not store.has(POS, "below", partner, part):
            continue
        for joined in store.match_positive("hasPrtcp", None, part):
            con = joined.subject
            if store.has(POS, "isa", con, "Con") and store.has(POS, "hasPrtcp", con, partner):
                return part
    return None


class ExemplarStore:
    """Directory of exemplar files, one per captured instance."""

    SUFFIX = ".exemplar"

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def save(self, exemplar: Exemplar) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        name = f"{exemplar.concept}_{exemplar.tick:04d}_{exemplar.object_id}{self.SUFFIX}"
        path = self.root / name
        path.write_text(exemplar.render(), encoding="utf-8")
        return path

    def load_all(self, concept: str | None = None) -> list[Exemplar]:
        if not self.root.is_dir():
            return []
        out = []
        for path in sorted(self.root.glob(f"*{self.SUFFIX}")):
            exemplar = Exemplar.parse(path.read_text(encoding="utf-8"))
            if concept is None or exemplar.concept == concept:
                out.append(exemplar)
        return out


def _window_offsets(radius: int) -> list[Cell]:
    span = range(-radius, radius + 1)
    return [(dr, dc) for dr in span for dc in span]


def extract_patch(host: Mask, cell: Cell, radius: int) -> Patch:
    """Occupancy of ``host`` in the window centred on ``cell``, row-major."""
    r, c = cell
    return tuple(
        1 if (r + dr, c + dc) in host else 0 for dr, dc in _window_offsets(radius)
    )


def _hamming(a: Patch, b: Patch) -> int:
    return sum(x != y for x, y in zip(a, b))


def _min_hamming(patch: Patch, pool: tuple[Patch, ...]) -> int | None:
    if not pool:
        return None
    return min(_hamming(patch, other) for other in pool)


@dataclass(frozen=True)
class DetectorModel:
    """Nearest-descriptor part detector over binary occupancy patches."""

    concept: str
    radius: int
    tau: int
    positives: tuple[Patch, ...]
    negatives: tuple[Patch, ...]

    def accepts(self, patch: Patch) -> bool:
        d_pos = _min_hamming(patch, self.positives)
        if d_pos is None or d_pos > self.tau:
            return False
        d_neg = _min_hamming(patch, self.negatives)
        return d_neg is None or d_pos < d_neg

    def render(self) -> str:
        lines = [
            f"concept {self.concept}",
            f"radius {self.radius}",
            f"tau {self.tau}",
        ]
        lines.extend(f"positive {_patch_to_bits(p)}" for p in self.positives)
        lines.extend(f"negative {_patch_to_bits(p)}" for p in self.negatives)
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8")

    @staticmethod
    def parse(text: str) -> "DetectorModel":
        concept = ""
        radius = tau = None
        positives: list[Patch] = []
        negatives: list[Patch] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            key, _, value = line.partition(" ")
            if key == "concept":
                concept = value
            elif key == "radius":
                radius = int(value)
            elif key == "tau":
                tau = int(value)
            elif key == "positive":
                positives.append(_bits_to_patch(value))
            elif key == "negative":
                negatives.append(_bits_to_patch(value))
            else:
                raise ConceptError(f"bad detector line: {raw!r}")
        if not concept or radius is None or tau is None:
            raise ConceptError("detector text missing concept, radius, or tau")
        side = 2 * radius + 1
        for patch in positives + negatives:
            if len(patch) != side * side:
                raise ConceptError("patch length does not match radius")
        return DetectorModel(concept, radius, tau, tuple(positives), tuple(negatives))

    @staticmethod
    def load(path: str | Path) -> "DetectorModel":
        return DetectorModel.parse(Path(path).read_text(encoding="utf-8"))


def _patch_to_bits(patch: Patch) -> str:
    return "".join(str(bit) for bit in patch)


def _bits_to_patch(text: str) -> Patch:
    if not text or any(ch not in "01" for ch in text):
        raise ConceptError(f"bad patch bits: {text!r}")
    return tuple(int(ch) for ch in text)


def train_detector(
    exemplars: list[Exemplar],
    radius: int = DEFAULT_PATCH_RADIUS,
    tau: int = DEFAULT_TAU,
) -> DetectorModel:
    """Build a detector from exemplars of a single concept.

    Positive patches come from part cells, negative patches from the rest
    of each host mask.  Patches are deduplicated; a patch seen on both
    sides counts as positive.
    """
    if not exemplars:
        raise ConceptError("cannot train on an empty exemplar set")
    names = sorted({e.concept for e in exemplars})
    if len(names) > 1:
        raise ConceptError(f"mixed concepts in training set: {', '.join(names)}")
    if radius < 1:
        raise ConceptError(f"patch radius must be at least 1, got {radius}")
    if tau < 0:
        raise ConceptError(f"tau must be non-negative, got {tau}")
    positives: set[Patch] = set()
    negatives: set[Patch] = set()
    for exemplar in exemplars:
        for cell in exemplar.host_mask:
            patch = extract_patch(exemplar.host_mask, cell, radius)
            if cell in exemplar.part_mask:
                positives.add(patch)
            else:
                negatives.add(patch)
    negatives -= positives
    if not positives:
        raise ConceptError("training produced no positive patches")
    return DetectorModel(names[0], radius, tau, tuple(sorted(positives)), tuple(sorted(negatives)))


def detect(model: DetectorModel, frame: Frame, object_id: str) -> Mask:
    """Cells of the object whose neighbourhood looks like the learned part.

    Patches are extracted from the object's own mask, so the answer moves
    rigidly with the object and is empty for shapes the model has never
    seen near a part.
    """
    host = frame.mask(object_id)
    hits = [
        cell for cell in host if model.accepts(extract_patch(host, cell, model.radius))
    ]
    return frozenset(hits)


class DetectorRegistry:
    """Trained detectors, keyed by concept name, for use during perception."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[ConceptDef, DetectorModel]] = {}

    def register(self, definition: ConceptDef, model: DetectorModel) -> None:
        if definition.name != model.concept:
            raise ConceptError(
                f"definition {definition.name} does not match model {model.concept}"
            )
        self._entries[definition.name] = (definition, model)

    def concepts(self) -> list[str]:
        return sorted(self._entries)

    def find(self, host_class: str, partner_class: str) -> tuple[ConceptDef, DetectorModel] | None:
        for name in self.concepts():
            definition, model = self._entries[name]
            if definition.host_class == host_class and definition.partner_class == partner_class:
                return definition, model
        return None

    def detect_for(self, frame: Frame, object_id: str) -> dict[str, Mask]:
        """Non-empty detections for one object; perception calls this per query."""
        out: dict[str, Mask] = {}
        for name in self.concepts():
            definition, model = self._entries[name]
            if frame.classes.get(object_id) != definition.host_class:
                continue
            mask = detect(model, frame, object_id)
            if mask:
                out[name] = mask
        return out
