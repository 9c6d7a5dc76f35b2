"""Built-in support theory and the glue around it.

The rules themselves ship as a DSL text asset (``assets/rules/support.rules``)
so they can be read and overridden without touching code.  This module loads
them, derives the perception queries a believed support description demands,
and decides which descriptions survive into the next tick.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import StoreError
from .perception import BLANK, PerceptionQuery
from .rules import RuleSet, parse_rules, validate_ruleset
from .store import POS, BeliefStore, Provenance, ReifyRegistry, Triple
from .vocab import CLASSES, FLOOR_ID

logger = logging.getLogger(__name__)

ASSERTED = Provenance("asserted")


@lru_cache(maxsize=1)
def builtin_ruleset() -> RuleSet:
    """The shipped support theory, parsed and validated."""
    text = (
        resources.files("schemaworld")
        .joinpath("assets/rules/support.rules")
        .read_text(encoding="utf-8")
    )
    ruleset = parse_rules(text)
    validate_ruleset(ruleset)
    return ruleset


def load_ruleset(path: str | Path) -> RuleSet:
    """Parse and validate a rule override file."""
    ruleset = parse_rules(Path(path).read_text(encoding="utf-8"))
    validate_ruleset(ruleset)
    return ruleset


def base_store(registry: ReifyRegistry | None = None) -> BeliefStore:
    """A store pre-loaded with the class vocabulary and the floor entity."""
    store = BeliefStore(registry=registry)
    for name in sorted(CLASSES):
        store.register_entity(name, "concept")
    store.register_entity(FLOOR_ID, "object")
    return store


def inject_world(store: BeliefStore, world) -> None:
    """Register scenario objects and assert their class memberships.

    Fixed objects are atypical: no gravity applies, so they are never
    tagged Obj.  The floor is atypical too, whatever the scenario says.
    """
    for obj_id in world.object_ids():
        spec = world.spec(obj_id)
        if not store.has_entity(obj_id):
            store.register_entity(obj_id, "object")
        store.assert_triple(POS, "isa", obj_id, spec.class_name, ASSERTED)
        if spec.fixed or obj_id == FLOOR_ID:
            store.assert_triple(POS, "isa", obj_id, "Fixed", ASSERTED)
        else:
            store.assert_triple(POS, "isa", obj_id, "Obj", ASSERTED)


def inject_percepts(store: BeliefStore, report) -> None:
    """Copy a perception report's triples into the store."""
    prov = Provenance("perceived", tick=report.tick)
    for triple in sorted(report.triples):
        for entity in (triple.subject, triple.object):
            if not store.has_entity(entity):
                store.register_entity(entity, "object")
        store.assert_triple(
            triple.polarity, triple.predicate, triple.subject, triple.object, prov
        )


def inject_goals(store: BeliefStore, goals) -> None:
    """Record pending goals as asserted triples the loop can query."""
    for goal in goals:
        if goal.kind == "support":
            store.assert_triple(POS, "goalSupp", goal.object_id, goal.target, ASSERTED)
        else:
            store.assert_triple(POS, "goalUnsupp", goal.object_id, goal.object_id, ASSERTED)


def emit_queries(
    store: BeliefStore, standing: tuple[PerceptionQuery, ...] = ()
) -> set[PerceptionQuery]:
    """Queries the current beliefs demand, plus standing attention queries.

    Every believed support description expects its supportee to keep still
    relative to the floor and to stay in contact with something, so those
    two checks are queued for the next tick.
    """
    queries: set[PerceptionQuery] = set(standing)
    for link in store.query_pattern("suppee"):
        if store.has(POS, "isa", link.subject, "DSupp"):
            queries.add(PerceptionQuery("relativeMovement", link.object, FLOOR_ID))
            queries.add(PerceptionQuery("contact", link.object, BLANK))
    return queries


def persist_schemas(prev_store: BeliefStore, percepts: set[Triple]) -> set[Triple]:
    """Support descriptions whose expectations this tick's percepts confirm.

    A description survives only on positive evidence: a contact percept
    between suppee and supper and no downward movement of the suppee.
    Unobserved expectations drop the schema (conservative default).
    Contact and Movement situations never carry over; they are rebuilt
    from fresh percepts and reification keys keep their ids stable.
    """
    carried: set[Triple] = set()
    for isa_triple in prev_store.query_pattern("isa", None, "DSupp"):
        situation = isa_triple.subject
        suppees = prev_store.query_pattern("suppee", situation)
        suppers = prev_store.query_pattern("supper", situation)
        if len(suppees) != 1 or len(suppers) != 1:
            logger.warning("malformed support description %s not carried", situation)
            continue
        suppee = suppees[0].object
        supper = suppers[0].object
        if Triple(POS, "movDir", suppee, "down") in percepts:
            logger.info(
                "dropped %s: suppee %s observed moving down", situation, suppee
            )
            continue
        contact_confirmed = (
            Triple(POS, "contacts", suppee, supper) in percepts
            or Triple(POS, "contacts", supper, suppee) in percepts
        )
        if not contact_confirmed:
            logger.info(
                "dropped %s: contact between %s and %s unobserved",
                situation,
                suppee,
                supper,
            )
            continue
        carried.update({isa_triple, suppees[0], suppers[0]})
    return carried


def carry_in(store: BeliefStore, prev_store: BeliefStore, carried: set[Triple]) -> None:
    """Re-assert carried triples, preserving their original provenance."""
    for triple in sorted(carried):
        for entity in (triple.subject, triple.object):
            if not store.has_entity(entity):
                try:
                    kind = prev_store.entity_kind(entity)
                except StoreError:
                    kind = "object"
                store.register_entity(entity, kind)
        store.assert_triple(
            triple.polarity,
            triple.predicate,
            triple.subject,
            triple.object,
            prev_store.provenance(triple),
        )
