"""Polarity-tagged triple store with reification and dependency queries.

Beliefs are (polarity, predicate, subject, object) triples over registered
entities.  Polarity separates believed-true from believed-false statements of
the same predicate; asserting one while the opposite is present is reported
as a conflict and the new triple is skipped, never silently merged.

Entities are either named (introduced by the world or by hand) or reified
(minted for existential rule heads).  Reification is keyed: the same key
always yields the same entity id, within a run and across runs, because ids
are derived by hashing the key.  A registry of keys can be shared between
stores so that an agent rebuilding its store every tick keeps stable ids for
the situations it keeps re-deriving.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import StoreError, VocabularyError
from .vocab import DIRECTIONS, ENTITY_KINDS, PREDICATES

TOKEN_RE = re.compile(r"^[A-Za-z0-9_.:-]+$")

POS = "pos"
NEG = "neg"

ADDED = "added"
DUPLICATE = "duplicate"
CONFLICT = "conflict"

_KIND_CODE = {
    "object": "obj",
    "situation": "sit",
    "force": "frc",
    "direction": "dir",
    "concept": "cls",
}


@dataclass(frozen=True, order=True)
class Provenance:
    """Where a triple came from: perceived(tick), inferred(rule, tick), asserted."""

    origin: str  # "perceived" | "inferred" | "asserted"
    rule_id: str | None = None
    tick: int | None = None

    def render(self) -> str:
        if self.origin == "perceived":
            return f"perceived@{self.tick}"
        if self.origin == "inferred":
            return f"inferred:{self.rule_id}@{self.tick}"
        return "asserted"

    @staticmethod
    def parse(text: str) -> "Provenance":
        if text == "asserted":
            return Provenance("asserted")
        if text.startswith("perceived@"):
            return Provenance("perceived", tick=int(text.split("@", 1)[1]))
        if text.startswith("inferred:"):
            rest = text[len("inferred:"):]
            rule_id, _, tick = rest.rpartition("@")
            if not rule_id:
                raise StoreError(f"bad provenance token: {text!r}")
            return Provenance("inferred", rule_id=rule_id, tick=int(tick))
        raise StoreError(f"bad provenance token: {text!r}")


@dataclass(frozen=True, order=True)
class Triple:
    polarity: str
    predicate: str
    subject: str
    object: str

    def render(self) -> str:
        return f"{self.polarity} {self.predicate} {self.subject} {self.object}"


@dataclass(frozen=True)
class Derivation:
    """How a triple was first derived: rule, premise triples, side conditions."""

    rule_id: str
    premises: tuple[Triple, ...]
    naf_checks: tuple[str, ...] = ()
    builtin_checks: tuple[str, ...] = ()


def reified_id(kind: str, key: tuple[str, ...]) -> str:
    """Deterministic id for a reified entity: hash of kind and key."""
    digest = hashlib.sha1(("\x1f".join((kind,) + key)).encode("utf-8")).hexdigest()
    return f"rf_{_KIND_CODE[kind]}_{digest[:10]}"


_CODE_KIND = {code: kind for kind, code in _KIND_CODE.items()}


def _infer_kind(entity_id: str) -> str:
    from .vocab import CLASSES

    if entity_id.startswith("rf_"):
        parts = entity_id.split("_")
        if len(parts) == 3 and parts[1] in _CODE_KIND:
            return _CODE_KIND[parts[1]]
    if entity_id in CLASSES:
        return "concept"
    return "object"


class ReifyRegistry:
    """Key -> entity id map shared across the stores of successive ticks."""

    def __init__(self) -> None:
        self._ids: dict[tuple[str, tuple[str, ...]], str] = {}

    def mint(self, kind: str, key: tuple[str, ...]) -> tuple[str, bool]:
        existing = self._ids.get((kind, key))
        if existing is not None:
            return existing, False
        new_id = reified_id(kind, key)
        self._ids[(kind, key)] = new_id
        return new_id, True

    def __len__(self) -> int:
        return len(self._ids)


@dataclass
class ConflictRecord:
    triple: Triple
    existing: Triple
    provenance: Provenance

    def render(self) -> str:
        return f"{self.triple.render()} vs {self.existing.render()}"


class BeliefStore:
    """Triple store over a fixed predicate vocabulary.

    All query results are sorted, so iteration order never depends on
    insertion history and dumps are reproducible byte for byte.
    """

    def __init__(
        self,
        vocabulary: frozenset[str] | set[str] = PREDICATES,
        registry: ReifyRegistry | None = None,
    ) -> None:
        self.vocabulary = frozenset(vocabulary)
        self.registry = registry if registry is not None else ReifyRegistry()
        self._entities: dict[str, str] = {}
        self._generation: dict[str, int] = {}
        self._triples: set[Triple] = set()
        self._provenance: dict[Triple, Provenance] = {}
        self.derivations: dict[Triple, Derivation] = {}
        # positive-triple indexes used by the rule matcher
        self._by_pred: dict[str, list[Triple]] = {}
        self._by_pred_subj: dict[tuple[str, str], list[Triple]] = {}
        self._by_pred_obj: dict[tuple[str, str], list[Triple]] = {}
        for d in DIRECTIONS:
            self.register_entity(d, "direction")

    # -- entities ---------------------------------------------------------

    def register_entity(self, entity_id: str, kind: str = "object") -> None:
        if kind not in ENTITY_KINDS:
            raise StoreError(f"unknown entity kind: {kind!r}")
        if not TOKEN_RE.match(entity_id):
            raise StoreError(f"bad entity id token: {entity_id!r}")
        existing = self._entities.get(entity_id)
        if existing is not None:
            if existing != kind:
                raise StoreError(
                    f"entity {entity_id!r} already registered with kind {existing!r}"
                )
            return
        self._entities[entity_id] = kind
        self._generation.setdefault(entity_id, 0)

    def has_entity(self, entity_id: str) -> bool:
        return entity_id in self._entities

    def entity_kind(self, entity_id: str) -> str:
        try:
            return self._entities[entity_id]
        except KeyError:
            raise StoreError(f"unknown entity: {entity_id!r}") from None

    def entities(self) -> list[str]:
        return sorted(self._entities)

    def generation(self, entity_id: str) -> int:
        if entity_id not in self._entities:
            raise StoreError(f"unknown entity: {entity_id!r}")
        return self._generation[entity_id]

    def reify(self, kind: str, key: tuple[str, ...]) -> str:
        """Mint (or look up) the entity for a reification key.

        The entity's generation is one more than the highest generation of
        any registered entity mentioned in the key; named entities are
        generation 0.  The rule engine uses generations to cap chains of
        reification on top of reification.
        """
        entity_id, _ = self.registry.mint(kind, key)
        gen = 1 + max(
            (self._generation[k] for k in key if k in self._entities),
            default=0,
        )
        if entity_id in self._entities:
            if self._entities[entity_id] != kind:
                raise StoreError(f"reified id {entity_id!r} clashes with kind")
            self._generation[entity_id] = max(self._generation[entity_id], gen)
        else:
            self._entities[entity_id] = kind
            self._generation[entity_id] = gen
        return entity_id

    # -- triples ----------------------------------------------------------

    def _check_triple(self, polarity: str, predicate: str, subject: str, obj: str) -> None:
        if polarity not in (POS, NEG):
            raise StoreError(f"bad polarity: {polarity!r}")
        if predicate not in self.vocabulary:
            raise VocabularyError(f"undeclared predicate: {predicate!r}")
        for entity in (subject, obj):
            if entity not in self._entities:
                raise StoreError(f"unknown entity in triple: {entity!r}")

    def assert_triple(
        self,
        polarity: str,
        predicate: str,
        subject: str,
        obj: str,
        provenance: Provenance,
    ) -> str:
        """Add a triple; returns ADDED, DUPLICATE, or CONFLICT.

        On conflict (the opposite polarity is already believed) the new
        triple is not added and the existing belief stands.
        """
        self._check_triple(polarity, predicate, subject, obj)
        triple = Triple(polarity, predicate, subject, obj)
        if triple in self._triples:
            return DUPLICATE
        opposite = Triple(NEG if polarity == POS else POS, predicate, subject, obj)
        if opposite in self._triples:
            return CONFLICT
        self._triples.add(triple)
        self._provenance[triple] = provenance
        if polarity == POS:
            self._by_pred.setdefault(predicate, []).append(triple)
            self._by_pred_subj.setdefault((predicate, subject), []).append(triple)
            self._by_pred_obj.setdefault((predicate, obj), []).append(triple)
        return ADDED

    def has(self, polarity: str, predicate: str, subject: str, obj: str) -> bool:
        return Triple(polarity, predicate, subject, obj) in self._triples

    def provenance(self, triple: Triple) -> Provenance:
        try:
            return self._provenance[triple]
        except KeyError:
            raise StoreError(f"triple not in store: {triple.render()}") from None

    def query_pattern(
        self,
        predicate: str | None = None,
        subject: str | None = None,
        obj: str | None = None,
        polarity: str | None = POS,
    ) -> list[Triple]:
        """Wildcard query; None fields match anything.  Results are sorted."""
        if predicate is not None and predicate not in self.vocabulary:
            raise VocabularyError(f"undeclared predicate: {predicate!r}")
        out = [
            t
            for t in self._triples
            if (polarity is None or t.polarity == polarity)
            and (predicate is None or t.predicate == predicate)
            and (subject is None or t.subject == subject)
            and (obj is None or t.object == obj)
        ]
        return sorted(out)

    def match_positive(self, predicate: str, subject: str | None, obj: str | None) -> list[Triple]:
        """Index-backed positive-triple lookup for the rule matcher."""
        if subject is not None and obj is not None:
            t = Triple(POS, predicate, subject, obj)
            return [t] if t in self._triples else []
        if subject is not None:
            rows = self._by_pred_subj.get((predicate, subject), [])
        elif obj is not None:
            rows = self._by_pred_obj.get((predicate, obj), [])
        else:
            rows = self._by_pred.get(predicate, [])
        return sorted(rows)

    def triples(self, polarity: str | None = None) -> list[Triple]:
        if polarity is None:
            return sorted(self._triples)
        return sorted(t for t in self._triples if t.polarity == polarity)

    def __len__(self) -> int:
        return len(self._triples)

    # -- dependency (cut-node) queries -------------------------------------

    def _adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {}
        for t in self._triples:
            if t.subject == t.object:
                continue
            adj.setdefault(t.subject, set()).add(t.object)
            adj.setdefault(t.object, set()).add(t.subject)
        return adj

    @staticmethod
    def _reachable(adj: dict[str, set[str]], start: str, goal: str, banned: str | None) -> bool:
        if start == banned or goal == banned:
            return False
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            for nb in adj.get(node, ()):
                if nb != banned and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return False

    def dependency_query(self, a: str, b: str) -> list[str]:
        """Entities lying on every undirected path between a and b.

        The belief graph has one node per entity and one edge per triple
        (either polarity).  Returns the empty list when a and b are not
        connected at all, and never includes a or b themselves.
        """
        for entity in (a, b):
            if entity not in self._entities:
                raise StoreError(f"unknown entity: {entity!r}")
        if a == b:
            raise StoreError(f"dependency endpoints must differ: {a!r}")
        adj = self._adjacency()
        if not self._reachable(adj, a, b, banned=None):
            return []
        cut = [
            node
            for node in sorted(adj)
            if node not in (a, b) and not self._reachable(adj, a, b, banned=node)
        ]
        return cut

    # -- serialization ------------------------------------------------------

    def dump(self) -> str:
        """One line per triple, lexicographically sorted:

        ``<polarity> <predicate> <subject> <object> # <provenance>``
        """
        lines = [
            f"{t.render()} # {self._provenance[t].render()}"
            for t in self._triples
        ]
        return "\n".join(sorted(lines)) + ("\n" if lines else "")

    @classmethod
    def load(
        cls,
        text: str,
        vocabulary: frozenset[str] | set[str] = PREDICATES,
        registry: ReifyRegistry | None = None,
    ) -> "BeliefStore":
        """Parse a dump back into a store.

        Entity kinds are not part of the dump format; they are inferred from
        the id (reified ids carry a kind code, class names are known), and
        anything else is registered as a plain object.
        """
        store = cls(vocabulary, registry)
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            body, sep, prov_text = line.partition("#")
            if not sep:
                raise StoreError(f"dump line {n}: missing provenance comment")
            fields = body.split()
            if len(fields) != 4:
                raise StoreError(f"dump line {n}: expected 4 fields, got {len(fields)}")
            polarity, predicate, subject, obj = fields
            for entity in (subject, obj):
                if not store.has_entity(entity):
                    store.register_entity(entity, _infer_kind(entity))
            status = store.assert_triple(
                polarity, predicate, subject, obj, Provenance.parse(prov_text.strip())
            )
            if status == CONFLICT:
                raise StoreError(f"dump line {n}: conflicting triple {body.strip()!r}")
        return store
