"""Forward chaining over the belief store.

Saturation is semi-naive: after the first round a rule only re-fires if at
least one positive body atom matches a triple derived in the previous round.
Negation-as-failure is evaluated against a per-tick scope of (predicate,
subject) pairs that perception actually answered; a negated atom over
anything else is simply false.  Because negated predicates are never derived
positively by rules (enforced at validation), their truth value is fixed for
the whole saturation and the semi-naive strategy stays sound.

Existential heads mint entities through the store's keyed reifier.  The key
is (rule id, new-variable name, frontier binding), so re-deriving the same
conclusion in a later round, tick, or run reuses the same entity.  A depth
cap keeps reification from feeding on its own output: a minting rule is
skipped when any entity in its binding is already at the cap's generation.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from .errors import EngineError
from .rules import Atom, Builtin, Const, RuleSet, Var
from .store import (
    ADDED,
    CONFLICT,
    BeliefStore,
    ConflictRecord,
    Derivation,
    Provenance,
    Triple,
)
from .vocab import CLASSES, OPPOSITES

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 2

NafScope = frozenset[tuple[str, str]]


Binding = tuple[tuple[str, str], ...]


@dataclass
class FixpointReport:
    """Summary of one saturation run."""

    iterations: int = 0
    derived: int = 0
    firings: list[tuple[str, Binding]] = field(default_factory=list)
    reached_fixpoint: bool = False
    conflicts: list[ConflictRecord] = field(default_factory=list)
    reified: list[str] = field(default_factory=list)
    depth_gated: int = 0

    def fired_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rule_id, _ in self.firings:
            counts[rule_id] = counts.get(rule_id, 0) + 1
        return counts

    def render(self) -> str:
        lines = [
            f"iterations={self.iterations} derived={self.derived} "
            f"reified={len(self.reified)} conflicts={len(self.conflicts)} "
            f"depth_gated={self.depth_gated}"
        ]
        counts = self.fired_counts()
        for rule_id in sorted(counts):
            lines.append(f"  fired {rule_id}: {counts[rule_id]}")
        for conflict in self.conflicts:
            lines.append(f"  conflict: {conflict.render()}")
        return "\n".join(lines)


def _pattern(atom: Atom) -> tuple[str, object, object]:
    """Triple pattern for an atom; class atoms look up isa triples."""
    if atom.is_class_atom:
        return "isa", atom.args[0], Const(atom.predicate)
    return atom.predicate, atom.args[0], atom.args[1]


def _resolve(term, binding: dict[str, str]) -> str | None:
    if isinstance(term, Const):
        return term.name
    return binding.get(term.name)


def _unify(
    triple: Triple, s_term, o_term, binding: dict[str, str]
) -> dict[str, str] | None:
    out = binding
    for term, value in ((s_term, triple.subject), (o_term, triple.object)):
        if isinstance(term, Const):
            if term.name != value:
                return None
        else:
            bound = out.get(term.name)
            if bound is None:
                if out is binding:
                    out = dict(binding)
                out[term.name] = value
            elif bound != value:
                return None
    return out if out is not binding else dict(binding)


def _match_body(
    store: BeliefStore,
    atoms: tuple[Atom, ...],
    delta_triples: list[Triple] | None,
    delta_pos: int | None,
):
    """Yield bindings for a positive body; atom at delta_pos matches the delta only."""

    def extend(i: int, binding: dict[str, str]):
        if i == len(atoms):
            yield binding
            return
        pred, s_term, o_term = _pattern(atoms[i])
        s_val = _resolve(s_term, binding)
        o_val = _resolve(o_term, binding)
        if delta_pos is not None and i == delta_pos:
            candidates = [
                t
                for t in delta_triples
                if t.polarity == "pos"
                and t.predicate == pred
                and (s_val is None or t.subject == s_val)
                and (o_val is None or t.object == o_val)
            ]
        else:
            candidates = store.match_positive(pred, s_val, o_val)
        for triple in candidates:
            extended = _unify(triple, s_term, o_term, binding)
            if extended is not None:
                yield from extend(i + 1, extended)

    yield from extend(0, {})


def _naf_holds(store: BeliefStore, atom: Atom, binding: dict[str, str], scope: NafScope) -> bool:
    pred, s_term, o_term = _pattern(atom)
    subject = _resolve(s_term, binding)
    obj = _resolve(o_term, binding)
    if (pred, subject) not in scope:
        return False
    return not store.has("pos", pred, subject, obj)


def _eval_builtins(builtins: tuple[Builtin, ...], binding: dict[str, str]) -> dict[str, str] | None:
    """Check inequality builtins and apply opp() bindings; None on failure."""
    out = binding
    for b in builtins:
        left = _resolve(b.left, out)
        if b.op == "neq":
            right = _resolve(b.right, out)
            if left is None or right is None or left == right:
                return None
        else:  # opp
            if left is None or left not in OPPOSITES:
                return None
            expected = OPPOSITES[left]
            if isinstance(b.right, Var):
                bound = out.get(b.right.name)
                if bound is None:
                    out = dict(out)
                    out[b.right.name] = expected
                elif bound != expected:
                    return None
            elif b.right.name != expected:
                return None
    return out


def _collect_premises(
    store: BeliefStore, atoms: tuple[Atom, ...], binding: dict[str, str]
) -> tuple[Triple, ...]:
    premises = []
    for atom in atoms:
        pred, s_term, o_term = _pattern(atom)
        premises.append(
            Triple("pos", pred, _resolve(s_term, binding), _resolve(o_term, binding))
        )
    return tuple(premises)


def _register_rule_constants(store: BeliefStore, ruleset: RuleSet) -> None:
    """Make sure constants mentioned by rules exist as entities."""
    for rule in ruleset:
        atoms = list(rule.body) + list(rule.naf) + [ha.atom for ha in rule.head]
        consts: set[str] = set()
        for atom in atoms:
            if atom.is_class_atom:
                consts.add(atom.predicate)
            consts.update(t.name for t in atom.args if isinstance(t, Const))
        for decl in rule.new_decls:
            consts.update(decl.tags)
        for name in sorted(consts):
            if store.has_entity(name):
                continue
            if name in CLASSES:
                store.register_entity(name, "concept")
            elif name in OPPOSITES:
                store.register_entity(name, "direction")
            else:
                store.register_entity(name, "object")


def run_to_fixpoint(
    store: BeliefStore,
    ruleset: RuleSet,
    naf_scope: NafScope = frozenset(),
    tick: int = 0,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    max_rounds: int = 10_000,
) -> FixpointReport:
    """Saturate the store in place and report what happened."""
    report = FixpointReport()
    _register_rule_constants(store, ruleset)
    delta: list[Triple] | None = None

    for _ in range(max_rounds):
        report.iterations += 1
        new_triples: list[Triple] = []
        for rule in ruleset:
            if delta is None:
                binding_iter = _match_body(store, rule.body, None, None)
            else:
                seen: set[tuple[tuple[str, str], ...]] = set()
                binding_iter = itertools.chain.from_iterable(
                    _match_body(store, rule.body, delta, pos)
                    for pos in range(len(rule.body))
                )

            for binding in binding_iter:
                if delta is not None:
                    key = tuple(sorted(binding.items()))
                    if key in seen:
                        continue
                    seen.add(key)
                if not all(_naf_holds(store, a, binding, naf_scope) for a in rule.naf):
                    continue
                evaluated = _eval_builtins(rule.builtins, binding)
                if evaluated is None:
                    continue
                binding = evaluated

                premises = _collect_premises(store, rule.body, binding)
                naf_notes = tuple(
                    "not "
                    + Atom(
                        a.predicate,
                        tuple(Const(_resolve(t, binding)) for t in a.args),
                    ).render()
                    for a in rule.naf
                )
                builtin_notes = tuple(
                    Builtin(
                        b.op,
                        Const(_resolve(b.left, binding)),
                        Const(_resolve(b.right, binding)),
                    ).render()
                    for b in rule.builtins
                )

                head_triples: list[tuple[str, str, str, str]] = []
                if rule.new_decls:
                    bound_entities = [
                        v for v in binding.values() if store.has_entity(v)
                    ]
                    if any(store.generation(e) >= depth_cap for e in bound_entities):
                        report.depth_gated += 1
                        continue
                    key_vals = tuple(binding[v] for v in rule.frontier)
                    for decl in rule.new_decls:
                        fresh = store.reify(
                            decl.kind, (rule.rule_id, decl.var.name) + key_vals
                        )
                        binding[decl.var.name] = fresh
                        for tag in decl.tags:
                            head_triples.append(("pos", "isa", fresh, tag))
                for ha in rule.head:
                    pred, s_term, o_term = _pattern(ha.atom)
                    head_triples.append(
                        (ha.polarity, pred, _resolve(s_term, binding), _resolve(o_term, binding))
                    )

                fired = False
                for polarity, pred, subj, obj in head_triples:
                    outcome = store.assert_triple(
                        polarity,
                        pred,
                        subj,
                        obj,
                        Provenance("inferred", rule_id=rule.rule_id, tick=tick),
                    )
                    triple = Triple(polarity, pred, subj, obj)
                    if outcome == ADDED:
                        fired = True
                        report.derived += 1
                        new_triples.append(triple)
                        store.derivations[triple] = Derivation(
                            rule.rule_id, premises, naf_notes, builtin_notes
                        )
                    elif outcome == CONFLICT:
                        existing = Triple(
                            "neg" if polarity == "pos" else "pos", pred, subj, obj
                        )
                        report.conflicts.append(
                            ConflictRecord(
                                triple,
                                existing,
                                Provenance("inferred", rule_id=rule.rule_id, tick=tick),
                            )
                        )
                        logger.warning(
                            "rule %s skipped conflicting conclusion %s",
                            rule.rule_id,
                            triple.render(),
                        )
                if fired:
                    report.firings.append(
                        (rule.rule_id, tuple(sorted(binding.items())))
                    )
                    for decl in rule.new_decls:
                        entity = binding[decl.var.name]
                        if entity not in report.reified:
                            report.reified.append(entity)

        if not new_triples:
            report.reached_fixpoint = True
            break
        delta = new_triples
    else:
        raise EngineError(f"saturation did not settle in {max_rounds} rounds")
    return report


# -- explanation ---------------------------------------------------------------


@dataclass(frozen=True)
class ExplanationNode:
    triple: Triple
    provenance: Provenance
    rule_id: str | None
    children: tuple["ExplanationNode", ...]
    naf_checks: tuple[str, ...]
    builtin_checks: tuple[str, ...]


def explain(store: BeliefStore, triple: Triple) -> ExplanationNode:
    """Derivation tree for an inferred triple; leaves are perceived or asserted."""
    root_prov = store.provenance(triple)  # raises if the triple is absent
    if root_prov.origin != "inferred":
        raise EngineError(f"not inferred: {triple.render()} is {root_prov.render()}")

    def build(t: Triple, trail: frozenset[Triple]) -> ExplanationNode:
        prov = store.provenance(t)
        derivation = store.derivations.get(t)
        if derivation is None or t in trail:
            return ExplanationNode(t, prov, None, (), (), ())
        deeper = trail | {t}
        children = tuple(build(p, deeper) for p in derivation.premises)
        return ExplanationNode(
            t, prov, derivation.rule_id, children, derivation.naf_checks, derivation.builtin_checks
        )

    return build(triple, frozenset())


def render_explanation(node: ExplanationNode, indent: int = 0) -> str:
    pad = "  " * indent
    lines = [f"{pad}{node.triple.render()}  [{node.provenance.render()}]"]
    if node.rule_id is not None:
        lines.append(f"{pad}  by rule {node.rule_id}")
        for check in node.naf_checks:
            lines.append(f"{pad}  | {check}")
        for check in node.builtin_checks:
            lines.append(f"{pad}  | {check}")
        for child in node.children:
            lines.append(render_explanation(child, indent + 2))
    return "\n".join(lines)
