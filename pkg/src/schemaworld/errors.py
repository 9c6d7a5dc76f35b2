"""Exception types shared across the package."""

from __future__ import annotations


class SchemaWorldError(Exception):
    """Base class for all package-specific errors."""


class VocabularyError(SchemaWorldError):
    """A predicate, entity, or class name is not declared."""


class StoreError(SchemaWorldError):
    """Invalid belief-store operation (unknown entity, bad token, ...)."""


class RuleParseError(SchemaWorldError):
    """Rule text could not be parsed; carries a source position."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class RuleValidationError(SchemaWorldError):
    """A parsed rule violates a safety or scoping restriction."""


class EngineError(SchemaWorldError):
    """Saturation or explanation failed (runaway reification, bad query)."""


class ScenarioError(SchemaWorldError):
    """A scenario file is malformed or violates a world invariant."""


class PerceptionError(SchemaWorldError):
    """A perception query is malformed or references unknown objects."""


class PlanError(SchemaWorldError):
    """Planning preconditions are not met (no detector, no belief, ...)."""


class ConceptError(SchemaWorldError):
    """Part-concept definition or training input is unusable."""


class ConfigError(SchemaWorldError):
    """An agent config file has an unknown key or a bad value."""
