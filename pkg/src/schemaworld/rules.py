"""Textual rule language for the forward chainer.

One rule per statement::

    rule diagnose_support: Con(?c), hasPrtcp(?c,?e), hasPrtcp(?c,?r),
        below(?r,?e), not movDir(?e,down), ?e != ?r
        => new ?s: situation [DSupp], suppee(?s,?e), supper(?s,?r)

Body items come in a fixed order: positive atoms, then ``not`` atoms, then
builtins (the ``opp`` direction lookup and ``!=``).  The head may open with
``new`` declarations minting existential entities, followed by derived atoms;
a ``-`` prefix asserts the negative polarity.  Unary atoms like ``Obj(?x)``
are class-membership sugar for ``isa(x, Obj)``.  Variables are ``?name``,
constants bare words, comments run from ``#`` to end of line.

Parsing and printing round-trip: ``parse(print(rule)) == rule``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import RuleParseError, RuleValidationError
from .vocab import CLASSES, OPPOSITES, PERCEPTION_PREDICATES, PREDICATES

NEW_KINDS = ("object", "situation", "force")

KEYWORDS = {"rule", "not", "new"}


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def render(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True, order=True)
class Const:
    name: str

    def render(self) -> str:
        return self.name


Term = Var | Const


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    @property
    def is_class_atom(self) -> bool:
        return len(self.args) == 1

    def render(self) -> str:
        inner = ", ".join(t.render() for t in self.args)
        return f"{self.predicate}({inner})"


@dataclass(frozen=True)
class Builtin:
    op: str  # "opp" | "neq"
    left: Term
    right: Term

    def render(self) -> str:
        if self.op == "neq":
            return f"{self.left.render()} != {self.right.render()}"
        return f"opp({self.left.render()}, {self.right.render()})"


@dataclass(frozen=True)
class NewDecl:
    var: Var
    kind: str
    tags: tuple[str, ...]

    def render(self) -> str:
        return f"new {self.var.render()}: {self.kind} [{', '.join(self.tags)}]"


@dataclass(frozen=True)
class HeadAtom:
    polarity: str  # "pos" | "neg"
    atom: Atom

    def render(self) -> str:
        sign = "-" if self.polarity == "neg" else ""
        return f"{sign}{self.atom.render()}"


@dataclass(frozen=True)
class Rule:
    rule_id: str
    body: tuple[Atom, ...]
    naf: tuple[Atom, ...]
    builtins: tuple[Builtin, ...]
    new_decls: tuple[NewDecl, ...]
    head: tuple[HeadAtom, ...]

    @property
    def frontier(self) -> tuple[str, ...]:
        """Non-existential variables used in the head, in head order.

        Reification keys are built from these, so an existential head mints
        one entity per combination of head-relevant bindings rather than one
        per full body match.
        """
        new_vars = {d.var.name for d in self.new_decls}
        out: list[str] = []
        for ha in self.head:
            for term in ha.atom.args:
                if isinstance(term, Var) and term.name not in new_vars and term.name not in out:
                    out.append(term.name)
        return tuple(out)

    def render(self) -> str:
        parts = [a.render() for a in self.body]
        parts += [f"not {a.render()}" for a in self.naf]
        parts += [b.render() for b in self.builtins]
        head_parts = [d.render() for d in self.new_decls] + [h.render() for h in self.head]
        return f"rule {self.rule_id}: " + ", ".join(parts) + " => " + ", ".join(head_parts)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, rule_id: str) -> Rule:
        for rule in self.rules:
            if rule.rule_id == rule_id:
                return rule
        raise KeyError(rule_id)

    def render(self) -> str:
        return "\n".join(r.render() for r in self.rules) + "\n"


# -- tokenizer ---------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT VAR PUNCT END
    text: str
    line: int
    column: int


_PUNCT_TWO = ("=>", "!=")
_PUNCT_ONE = ":,()[]-"


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text[i:i + 2] in _PUNCT_TWO:
            tokens.append(_Token("PUNCT", text[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if ch == "?":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise RuleParseError("bare '?' without a variable name", line, col)
            tokens.append(_Token("VAR", text[i + 1:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_."):
                j += 1
            tokens.append(_Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _PUNCT_ONE:
            tokens.append(_Token("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        raise RuleParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("END", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]) -> None:
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str) -> RuleParseError:
        tok = self.peek()
        return RuleParseError(message, tok.line, tok.column)

    def expect_punct(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "PUNCT" or tok.text != text:
            raise self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.advance()

    def expect_ident(self, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail(f"expected {what}, found {tok.text or 'end of input'!r}")
        if tok.text in KEYWORDS:
            raise self.fail(f"keyword {tok.text!r} cannot be used as {what}")
        return self.advance()

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.text == text

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    # -- grammar -------------------------------------------------------------

    def parse_ruleset(self) -> RuleSet:
        rules: list[Rule] = []
        while not self.peek().kind == "END":
            rules.append(self.parse_rule())
        return RuleSet(tuple(rules))

    def parse_rule(self) -> Rule:
        tok = self.peek()
        if not self.at_keyword("rule"):
            raise self.fail("expected 'rule'")
        self.advance()
        rule_id = self.expect_ident("a rule id").text
        self.expect_punct(":")
        body, naf, builtins = self.parse_body()
        self.expect_punct("=>")
        new_decls, head = self.parse_head()
        if not head:
            raise RuleParseError("rule head has no derived atoms", tok.line, tok.column)
        return Rule(rule_id, tuple(body), tuple(naf), tuple(builtins), tuple(new_decls), tuple(head))

    def parse_body(self) -> tuple[list[Atom], list[Atom], list[Builtin]]:
        body: list[Atom] = []
        naf: list[Atom] = []
        builtins: list[Builtin] = []
        phase = 0  # 0 positive, 1 negated, 2 builtins
        while True:
            if self.at_keyword("not"):
                self.advance()
                if phase > 1:
                    raise self.fail("'not' atoms must come before builtins")
                phase = 1
                naf.append(self.parse_atom())
            elif self.peek().kind == "VAR" or (
                self.peek().kind == "IDENT" and self._lookahead_is_builtin()
            ):
                phase = 2
                builtins.append(self.parse_builtin())
            else:
                if phase > 0:
                    raise self.fail("positive atoms must come before 'not' and builtins")
                body.append(self.parse_atom())
            if self.at_punct(","):
                self.advance()
                continue
            return body, naf, builtins

    def _lookahead_is_builtin(self) -> bool:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "opp":
            return True
        # a constant followed by != is the left side of an inequality
        nxt = self.tokens[self.pos + 1]
        return nxt.kind == "PUNCT" and nxt.text == "!="

    def parse_atom(self) -> Atom:
        pred = self.expect_ident("a predicate or class name").text
        self.expect_punct("(")
        args = [self.parse_term()]
        if self.at_punct(","):
            self.advance()
            args.append(self.parse_term())
        self.expect_punct(")")
        return Atom(pred, tuple(args))

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "VAR":
            self.advance()
            return Var(tok.text)
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            self.advance()
            return Const(tok.text)
        raise self.fail("expected a variable or constant")

    def parse_builtin(self) -> Builtin:
        if self.at_keyword("opp") or (self.peek().kind == "IDENT" and self.peek().text == "opp"):
            self.advance()
            self.expect_punct("(")
            left = self.parse_term()
            self.expect_punct(",")
            right = self.parse_term()
            self.expect_punct(")")
            return Builtin("opp", left, right)
        left = self.parse_term()
        self.expect_punct("!=")
        right = self.parse_term()
        return Builtin("neq", left, right)

    def parse_head(self) -> tuple[list[NewDecl], list[HeadAtom]]:
        new_decls: list[NewDecl] = []
        head: list[HeadAtom] = []
        while self.at_keyword("new"):
            self.advance()
            tok = self.peek()
            if tok.kind != "VAR":
                raise self.fail("expected a variable after 'new'")
            self.advance()
            var = Var(tok.text)
            self.expect_punct(":")
            kind = self.expect_ident("an entity kind").text
            if kind not in NEW_KINDS:
                raise RuleParseError(
                    f"unknown entity kind {kind!r} (one of {', '.join(NEW_KINDS)})",
                    tok.line,
                    tok.column,
                )
            self.expect_punct("[")
            tags = [self.expect_ident("a class tag").text]
            while self.at_punct(","):
                self.advance()
                tags.append(self.expect_ident("a class tag").text)
            self.expect_punct("]")
            new_decls.append(NewDecl(var, kind, tuple(tags)))
            self.expect_punct(",")
        while True:
            polarity = "pos"
            if self.at_punct("-"):
                self.advance()
                polarity = "neg"
            head.append(HeadAtom(polarity, self.parse_atom()))
            if self.at_punct(","):
                self.advance()
                continue
            return new_decls, head


def parse_rules(text: str) -> RuleSet:
    return _Parser(_tokenize(text)).parse_ruleset()


def parse_rule(text: str) -> Rule:
    ruleset = parse_rules(text)
    if len(ruleset) != 1:
        raise RuleParseError("expected exactly one rule", 1, 1)
    return ruleset.rules[0]


# -- validation ---------------------------------------------------------------


def _atom_vars(atom: Atom) -> list[str]:
    return [t.name for t in atom.args if isinstance(t, Var)]


def _check_atom(rule: Rule, atom: Atom, predicates: frozenset[str], classes: frozenset[str]) -> None:
    if atom.is_class_atom:
        if atom.predicate not in classes:
            raise RuleValidationError(
                f"rule {rule.rule_id}: unknown class {atom.predicate!r}"
            )
    else:
        if atom.predicate not in predicates:
            raise RuleValidationError(
                f"rule {rule.rule_id}: unknown predicate {atom.predicate!r}"
            )


def validate_ruleset(
    ruleset: RuleSet,
    predicates: frozenset[str] = PREDICATES,
    classes: frozenset[str] = CLASSES,
    naf_allowed: frozenset[str] = PERCEPTION_PREDICATES,
) -> None:
    """Reject rules that are unsafe or out of vocabulary.

    Safety: negated atoms and head atoms may only use variables bound by the
    positive body (or by an ``opp`` builtin, or minted by ``new``).  Negation
    is further restricted to perception predicates that no rule in the set
    derives positively, which keeps negation-as-failure sound under forward
    chaining: the negated facts cannot appear mid-saturation.
    """
    seen_ids: set[str] = set()
    pos_head_preds = {
        ha.atom.predicate
        for rule in ruleset
        for ha in rule.head
        if ha.polarity == "pos" and not ha.atom.is_class_atom
    }
    for rule in ruleset:
        if rule.rule_id in seen_ids:
            raise RuleValidationError(f"duplicate rule id {rule.rule_id!r}")
        seen_ids.add(rule.rule_id)

        bound: set[str] = set()
        for atom in rule.body:
            _check_atom(rule, atom, predicates, classes)
            bound.update(_atom_vars(atom))
        for atom in rule.naf:
            _check_atom(rule, atom, predicates, classes)
            if atom.is_class_atom or atom.predicate not in naf_allowed:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: 'not' is only allowed on perception "
                    f"predicates, not {atom.predicate!r}"
                )
            if atom.predicate in pos_head_preds:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: {atom.predicate!r} is negated but also "
                    "derived positively by a rule head"
                )
            unbound = set(_atom_vars(atom)) - bound
            if unbound:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: unbound variable in 'not' atom: "
                    f"{sorted(unbound)}"
                )
        for builtin in rule.builtins:
            if builtin.op == "neq":
                for term in (builtin.left, builtin.right):
                    if isinstance(term, Var) and term.name not in bound:
                        raise RuleValidationError(
                            f"rule {rule.rule_id}: unbound variable ?{term.name} in !="
                        )
            else:  # opp
                if isinstance(builtin.left, Var) and builtin.left.name not in bound:
                    raise RuleValidationError(
                        f"rule {rule.rule_id}: opp() needs its first argument bound"
                    )
                if isinstance(builtin.left, Const) and builtin.left.name not in OPPOSITES:
                    raise RuleValidationError(
                        f"rule {rule.rule_id}: {builtin.left.name!r} is not a direction"
                    )
                if isinstance(builtin.right, Var):
                    bound.add(builtin.right.name)
                elif builtin.right.name not in OPPOSITES:
                    raise RuleValidationError(
                        f"rule {rule.rule_id}: {builtin.right.name!r} is not a direction"
                    )

        new_vars: set[str] = set()
        for decl in rule.new_decls:
            if decl.var.name in bound or decl.var.name in new_vars:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: 'new' variable ?{decl.var.name} already bound"
                )
            for tag in decl.tags:
                if tag not in classes:
                    raise RuleValidationError(
                        f"rule {rule.rule_id}: unknown class tag {tag!r}"
                    )
            new_vars.add(decl.var.name)
        if not rule.head:
            raise RuleValidationError(f"rule {rule.rule_id}: empty head")
        for ha in rule.head:
            _check_atom(rule, ha.atom, predicates, classes)
            if ha.polarity == "neg" and ha.atom.is_class_atom:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: negative class atoms are not supported"
                )
            unbound = set(_atom_vars(ha.atom)) - bound - new_vars
            if unbound:
                raise RuleValidationError(
                    f"rule {rule.rule_id}: unbound variable in head: {sorted(unbound)}"
                )
