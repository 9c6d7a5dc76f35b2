"""Taskable perception over consecutive frames.

Nothing is computed unsolicited: the report covers exactly the submitted
queries, so an empty query set yields an empty report.  Movement comes
from mask-centroid deltas between the two frames (rigid objects make this
exact), contact from 4-adjacency, and the below relation from a strict
majority vote over the adjacent cell pairs of a contact.

A negative contact triple is always produced for an explicit pair that is
apart, but a blank query reports a loss only: -contacts(s,x) appears when
s and x were adjacent in the previous frame and no longer are.  Blanket
negatives for every non-touching object would say more than was asked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PerceptionError
from .geometry import (
    Mask,
    adjacent_pairs,
    below_vote,
    centroid,
    chebyshev_ball,
    clip,
    mask_to_rle,
    masks_adjacent,
    min_manhattan,
)
from .store import NEG, POS, Triple
from .world import Frame

BLANK = None

DEFAULT_CONTACT_RADIUS = 1


@dataclass(frozen=True)
class PerceptionQuery:
    predicate: str  # "relativeMovement" | "contact"
    subject: str
    object: str | None = BLANK

    def sort_key(self) -> tuple[str, str, str]:
        return (self.predicate, self.subject, self.object or "")

    def render(self) -> str:
        return f"{self.predicate}({self.subject}, {self.object or '_'})"


def sorted_queries(queries) -> list[PerceptionQuery]:
    return sorted(queries, key=PerceptionQuery.sort_key)


@dataclass
class PerceptReport:
    tick: int
    triples: set[Triple] = field(default_factory=set)
    contact_masks: dict[tuple[str, str], Mask] = field(default_factory=dict)
    detections: dict[tuple[str, str], Mask] = field(default_factory=dict)

    def dump(self) -> str:
        lines = [f"tick {self.tick}"]
        lines += [t.render() for t in sorted(self.triples)]
        for a, b in sorted(self.contact_masks):
            lines.append(f"mask {a} {b} {mask_to_rle(self.contact_masks[(a, b)])}")
        for obj, concept in sorted(self.detections):
            lines.append(
                f"detect {obj} {concept} {mask_to_rle(self.detections[(obj, concept)])}"
            )
        return "\n".join(lines)


def _displacement(prev: Frame, curr: Frame, object_id: str) -> tuple[int, int]:
    pr, pc = centroid(prev.mask(object_id))
    cr, cc = centroid(curr.mask(object_id))
    return round(cr - pr), round(cc - pc)


def contact_mask(frame: Frame, a: str, b: str, radius: int = DEFAULT_CONTACT_RADIUS) -> Mask:
    """Cells within Chebyshev `radius` of the touching boundary; empty if apart."""
    pairs = adjacent_pairs(frame.mask(a), frame.mask(b))
    cells: set = set()
    for ca, cb in pairs:
        cells.update(chebyshev_ball(ca, radius))
        cells.update(chebyshev_ball(cb, radius))
    return clip(cells, frame.rows, frame.cols)


def _movement_triples(
    prev: Frame, curr: Frame, subject: str, partners: list[str]
) -> set[Triple]:
    out: set[Triple] = set()
    dr, dc = _displacement(prev, curr, subject)
    if dr >= 1:
        out.add(Triple(POS, "movDir", subject, "down"))
    elif dr <= -1:
        out.add(Triple(POS, "movDir", subject, "up"))
    if dc >= 1:
        out.add(Triple(POS, "movDir", subject, "right"))
    elif dc <= -1:
        out.add(Triple(POS, "movDir", subject, "left"))
    for other in partners:
        if _displacement(prev, curr, other) == (0, 0) and (dr, dc) == (0, 0):
            out.add(Triple(POS, "stillness", subject, other))
        d_prev = min_manhattan(prev.mask(subject), prev.mask(other))
        d_curr = min_manhattan(curr.mask(subject), curr.mask(other))
        if d_curr < d_prev:
            out.add(Triple(POS, "approaches", subject, other))
        elif d_curr > d_prev:
            out.add(Triple(POS, "departs", subject, other))
    return out


def _contact_triples(
    prev: Frame,
    curr: Frame,
    subject: str,
    other: str,
    explicit: bool,
    radius: int,
    report: PerceptReport,
) -> None:
    sub_mask = curr.mask(subject)
    oth_mask = curr.mask(other)
    if masks_adjacent(sub_mask, oth_mask):
        report.triples.add(Triple(POS, "contacts", subject, other))
        if below_vote(oth_mask, sub_mask):
            report.triples.add(Triple(POS, "below", other, subject))
        elif below_vote(sub_mask, oth_mask):
            report.triples.add(Triple(POS, "below", subject, other))
        mask = contact_mask(curr, subject, other, radius)
        if mask:
            report.contact_masks[(subject, other)] = mask
            report.triples.add(Triple(POS, "hasCtcMask", subject, other))
        return
    if explicit:
        report.triples.add(Triple(NEG, "contacts", subject, other))
    elif masks_adjacent(prev.mask(subject), prev.mask(other)):
        report.triples.add(Triple(NEG, "contacts", subject, other))


def perceive(
    frame_prev: Frame,
    frame_curr: Frame,
    queries,
    detectors=None,
    radius: int = DEFAULT_CONTACT_RADIUS,
) -> PerceptReport:
    """Answer queries over a consecutive frame pair."""
    if frame_curr.tick != frame_prev.tick + 1:
        raise PerceptionError(
            f"frames are not consecutive: {frame_prev.tick} then {frame_curr.tick}"
        )
    report = PerceptReport(tick=frame_curr.tick)
    ordered = sorted_queries(queries)
    for query in ordered:
        for name in (query.subject, query.object):
            if name is not BLANK and name not in frame_curr.masks:
                raise PerceptionError(f"query references unknown object: {name!r}")

    for query in ordered:
        if query.object is BLANK:
            partners = [o for o in sorted(frame_curr.masks) if o != query.subject]
        else:
            partners = [query.object]
        if query.predicate == "relativeMovement":
            report.triples |= _movement_triples(frame_prev, frame_curr, query.subject, partners)
        elif query.predicate == "contact":
            for other in partners:
                _contact_triples(
                    frame_prev,
                    frame_curr,
                    query.subject,
                    other,
                    explicit=query.object is not BLANK,
                    radius=radius,
                    report=report,
                )
        else:
            raise PerceptionError(f"unknown query predicate: {query.predicate!r}")

    if detectors is not None:
        for subject in sorted({q.subject for q in ordered}):
            for concept, mask in detectors.detect_for(frame_curr, subject).items():
                if mask:
                    report.detections[(subject, concept)] = mask
    return report


class PerceptionSystem:
    """Query buffer plus detector registry; queries are replaced, not merged."""

    def __init__(self, detectors=None, radius: int = DEFAULT_CONTACT_RADIUS) -> None:
        self.detectors = detectors
        self.radius = radius
        self._pending: tuple[PerceptionQuery, ...] = ()

    def submit_queries(self, queries) -> None:
        self._pending = tuple(sorted_queries(queries))

    @property
    def pending(self) -> tuple[PerceptionQuery, ...]:
        return self._pending

    def perceive(self, frame_prev: Frame, frame_curr: Frame) -> PerceptReport:
        return perceive(
            frame_prev, frame_curr, self._pending, self.detectors, self.radius
        )
