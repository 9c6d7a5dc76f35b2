"""Shared vocabulary for the belief layer.

Predicates, class names, and direction constants are declared in one place so
that every module agrees on what may appear in a triple.  The store rejects
triples over undeclared predicates, which catches typos in rule files and
scenario assets early instead of letting them silently never match.

Class membership is encoded with the ``isa`` predicate; a unary atom in the
rule language such as ``Obj(?x)`` is matched against ``isa(x, Obj)`` triples.
"""

from __future__ import annotations

# Predicates that perception is allowed to produce.  Negation-as-failure in
# rules is restricted to this family (and in practice only movDir is negated).
PERCEPTION_PREDICATES: frozenset[str] = frozenset(
    {
        "contacts",
        "movDir",
        "stillness",
        "approaches",
        "departs",
        "below",
        "hasCtcMask",
    }
)

# Predicates used by the reasoning layer on top of percepts.
THEORY_PREDICATES: frozenset[str] = frozenset(
    {
        "isa",
        "exrt",       # exrt(exerter, force)
        "aff",        # aff(force, affected)
        "dir",        # dir(force, direction)
        "hasPrtcp",   # situation participant
        "suppee",     # support situation -> supported entity
        "supper",     # support situation -> supporting entity
        "mover",      # movement situation -> moving entity
        "hasPrt",     # whole -> part
        "prtAt",      # part -> counterpart object it touches
        "goalSupp",   # asserted goal: subject should end up supported by object
        "goalUnsupp", # asserted goal: subject should stop being supported
    }
)

PREDICATES: frozenset[str] = PERCEPTION_PREDICATES | THEORY_PREDICATES

# Entity classes.  These are registered as constant entities of kind
# "concept" and appear as objects of isa triples.
CLASSES: frozenset[str] = frozenset(
    {
        "Obj",
        "Fixed",
        "Frc",
        "Grv",
        "Con",
        "Supp",
        "DSupp",
        "Movement",
        "Transportation",
        "CtcPrt",
        "UnkSrc",
        "Mug",
        "Hook",
        "Block",
        "Floor",
    }
)

DIRECTIONS: tuple[str, ...] = ("up", "down", "left", "right")

# Fixed opposite-direction table used by the opp(...) builtin.
OPPOSITES: dict[str, str] = {
    "up": "down",
    "down": "up",
    "left": "right",
    "right": "left",
}

# Reserved id of the ground object.  Rule files refer to it by name.
FLOOR_ID = "floor"

ENTITY_KINDS: tuple[str, ...] = ("object", "situation", "force", "direction", "concept")
