"""A deterministic grid microworld with a perceiving, rule-driven agent.

The package is organised as a loop: the world steps, perception answers
queries about it, a belief store is rebuilt and saturated under a forward
chainer with keyed reification, part concepts are learned from diagnosed
situations, and a planner turns support goals into placements or move
scripts.  ``run_loop`` ties the pieces together; the ``schemaworld``
console script exposes them individually.
"""

from .agent import (
    AgentConfig,
    Episode,
    EpisodeLog,
    TickTrace,
    load_config,
    parse_config,
    run_loop,
)
from .engine import (
    DEFAULT_DEPTH_CAP,
    ExplanationNode,
    FixpointReport,
    explain,
    render_explanation,
    run_to_fixpoint,
)
from .errors import (
    ConceptError,
    ConfigError,
    EngineError,
    PerceptionError,
    PlanError,
    RuleParseError,
    RuleValidationError,
    ScenarioError,
    SchemaWorldError,
    StoreError,
    VocabularyError,
)
from .geometry import iou, mask_to_rle, rle_to_mask
from .parts import (
    ConceptDef,
    DetectorModel,
    DetectorRegistry,
    Exemplar,
    ExemplarStore,
    capture_exemplar,
    detect,
    train_detector,
)
from .perception import (
    PerceptionQuery,
    PerceptionSystem,
    PerceptReport,
    contact_mask,
    perceive,
)
from .planner import (
    PlacementConstraint,
    Plan,
    candidate_poses,
    plan_support,
    plan_unsupport,
)
from .rules import Rule, RuleSet, parse_rules, validate_ruleset
from .store import (
    BeliefStore,
    ConflictRecord,
    Derivation,
    Provenance,
    ReifyRegistry,
    Triple,
    reified_id,
)
from .theory import (
    base_store,
    builtin_ruleset,
    carry_in,
    emit_queries,
    inject_goals,
    inject_percepts,
    inject_world,
    load_ruleset,
    persist_schemas,
)
from .world import (
    Frame,
    Goal,
    ObjectSpec,
    ScriptMove,
    World,
    bundled_scenario,
    load_scenario,
    load_scenario_file,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "BeliefStore",
    "ConceptDef",
    "ConceptError",
    "ConfigError",
    "ConflictRecord",
    "DEFAULT_DEPTH_CAP",
    "Derivation",
    "DetectorModel",
    "DetectorRegistry",
    "EngineError",
    "Episode",
    "EpisodeLog",
    "Exemplar",
    "ExemplarStore",
    "ExplanationNode",
    "FixpointReport",
    "Frame",
    "Goal",
    "ObjectSpec",
    "PerceptReport",
    "PerceptionError",
    "PerceptionQuery",
    "PerceptionSystem",
    "PlacementConstraint",
    "Plan",
    "PlanError",
    "Provenance",
    "ReifyRegistry",
    "Rule",
    "RuleParseError",
    "RuleSet",
    "RuleValidationError",
    "ScenarioError",
    "SchemaWorldError",
    "ScriptMove",
    "StoreError",
    "TickTrace",
    "Triple",
    "VocabularyError",
    "World",
    "base_store",
    "builtin_ruleset",
    "bundled_scenario",
    "candidate_poses",
    "capture_exemplar",
    "carry_in",
    "contact_mask",
    "detect",
    "emit_queries",
    "explain",
    "inject_goals",
    "inject_percepts",
    "inject_world",
    "iou",
    "load_config",
    "load_ruleset",
    "load_scenario",
    "load_scenario_file",
    "mask_to_rle",
    "parse_config",
    "parse_rules",
    "perceive",
    "persist_schemas",
    "plan_support",
    "plan_unsupport",
    "reified_id",
    "render",
    "render_explanation",
    "rle_to_mask",
    "run_loop",
    "run_to_fixpoint",
    "train_detector",
    "validate_ruleset",
]
