"""Rule DSL: parsing, rendering, and ruleset validation."""

from __future__ import annotations

import pytest

from schemaworld.errors import RuleParseError, RuleValidationError
from schemaworld.rules import (
    Atom,
    Builtin,
    Const,
    HeadAtom,
    NewDecl,
    Rule,
    RuleSet,
    Var,
    parse_rule,
    parse_rules,
    validate_ruleset,
)
from schemaworld.theory import builtin_ruleset

GRAVITY = (
    "rule gravity: Obj(?o) => "
    "new ?f: force [Grv], exrt(floor, ?f), aff(?f, ?o), dir(?f, down)"
)


def test_parse_minting_rule_structure():
    rule = parse_rule(GRAVITY)
    assert rule.rule_id == "gravity"
    assert rule.body == (Atom("Obj", (Var("o"),)),)
    assert rule.body[0].is_class_atom
    assert rule.new_decls == (NewDecl(Var("f"), "force", ("Grv",)),)
    assert [h.atom.predicate for h in rule.head] == ["exrt", "aff", "dir"]
    assert rule.head[0].atom.args == (Const("floor"), Var("f"))
    assert rule.head[2].atom.args == (Var("f"), Const("down"))


def test_parse_naf_builtins_and_negative_head():
    text = (
        "rule counter: Obj(?o), aff(?f, ?o), dir(?f, ?d), "
        "not movDir(?o, ?d), opp(?d, ?u), ?o != ?f => "
        "new ?g: force [Frc], aff(?g, ?o), dir(?g, ?u), -exrt(?o, ?g)"
    )
    rule = parse_rule(text)
    assert rule.naf == (Atom("movDir", (Var("o"), Var("d"))),)
    assert rule.builtins == (
        Builtin("opp", Var("d"), Var("u")),
        Builtin("neq", Var("o"), Var("f")),
    )
    assert rule.head[-1] == HeadAtom("neg", Atom("exrt", (Var("o"), Var("g"))))


def test_frontier_skips_new_and_repeated_vars():
    rule = parse_rule(
        "rule r1: contacts(?a, ?b) => new ?s: situation [Con], "
        "hasPrtcp(?s, ?a), hasPrtcp(?s, ?b), contacts(?b, ?a)"
    )
    assert rule.frontier == ("a", "b")


def test_render_parse_round_trip_handcrafted():
    for text in (
        GRAVITY,
        "rule t0: contacts(?a, ?b), ?a != ?b => contacts(?b, ?a)",
        "rule t1: Obj(?o), not movDir(?o, down) => stillness(?o, ?o)",
    ):
        rule = parse_rule(text)
        assert parse_rule(rule.render()) == rule


def test_render_parse_round_trip_builtin_ruleset():
    rules = builtin_ruleset()
    again = parse_rules(rules.render())
    assert again == rules


def test_empty_source_gives_empty_ruleset():
    rules = parse_rules("")
    assert isinstance(rules, RuleSet)
    assert len(rules) == 0
    assert parse_rules("# just a comment\n\n") == rules


def test_parse_reports_location():
    with pytest.raises(RuleParseError) as err:
        parse_rules("rule broken: Obj(?o) =>\nrule next: Obj(?o) => Obj(?o)")
    assert err.value.line >= 1
    assert err.value.column >= 1


def test_parse_rejects_missing_arrow():
    with pytest.raises(RuleParseError):
        parse_rule("rule r: Obj(?o), exrt(?o, ?o)")


def test_parse_rejects_body_phase_violations():
    # positive atoms cannot follow NAF atoms
    with pytest.raises(RuleParseError):
        parse_rule("rule r: not movDir(?o, down), Obj(?o) => Obj(?o)")


def test_parse_rejects_bare_question_mark():
    with pytest.raises(RuleParseError):
        parse_rule("rule r: Obj(? o) => Obj(?o)")


def test_parse_rule_wants_exactly_one():
    with pytest.raises(RuleParseError):
        parse_rule("rule a: Obj(?o) => Obj(?o)\nrule b: Obj(?o) => Obj(?o)")


def one_rule_set(text: str) -> RuleSet:
    return parse_rules(text)


def test_validate_accepts_builtin_ruleset():
    validate_ruleset(builtin_ruleset())


def test_validate_rejects_unsafe_negation():
    rules = one_rule_set("rule r: Obj(?o), not movDir(?x, down) => exrt(?o, ?o)")
    with pytest.raises(RuleValidationError, match="unbound"):
        validate_ruleset(rules)


def test_validate_rejects_naf_on_derived_predicate():
    rules = one_rule_set(
        "rule a: Obj(?o) => movDir(?o, down)\n"
        "rule b: Obj(?o), not movDir(?o, down) => exrt(?o, ?o)"
    )
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)


def test_validate_rejects_naf_on_theory_predicate():
    rules = one_rule_set("rule r: Obj(?o), not exrt(?o, ?o) => aff(?o, ?o)")
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)


def test_validate_rejects_unbound_head_variable():
    rules = one_rule_set("rule r: Obj(?o) => exrt(?o, ?q)")
    with pytest.raises(RuleValidationError, match="unbound"):
        validate_ruleset(rules)


def test_validate_rejects_duplicate_rule_ids():
    rules = one_rule_set(
        "rule r: Obj(?o) => exrt(?o, ?o)\nrule r: Obj(?x) => aff(?x, ?x)"
    )
    with pytest.raises(RuleValidationError, match="duplicate"):
        validate_ruleset(rules)


def test_validate_rejects_unknown_predicate_and_class():
    with pytest.raises(RuleValidationError, match="predicate"):
        validate_ruleset(one_rule_set("rule r: Obj(?o) => touches(?o, ?o)"))
    with pytest.raises(RuleValidationError, match="class"):
        validate_ruleset(one_rule_set("rule r: Widget(?o) => exrt(?o, ?o)"))


def test_validate_rejects_rebinding_new_var():
    rules = one_rule_set(
        "rule r: Obj(?o) => new ?o: situation [Con], hasPrtcp(?o, ?o)"
    )
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)


def test_validate_rejects_unknown_tag():
    rules = one_rule_set("rule r: Obj(?o) => new ?s: situation [Widget], hasPrtcp(?s, ?o)")
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)


def test_validate_rejects_unbound_opp_left():
    rules = one_rule_set("rule r: Obj(?o), opp(?d, ?u) => dir(?o, ?u)")
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)


def test_validate_rejects_negated_class_atom():
    rules = RuleSet(
        (
            Rule(
                rule_id="r",
                body=(Atom("Obj", (Var("o"),)),),
                naf=(),
                builtins=(),
                new_decls=(),
                head=(HeadAtom("neg", Atom("Fixed", (Var("o"),))),),
            ),
        )
    )
    with pytest.raises(RuleValidationError):
        validate_ruleset(rules)
