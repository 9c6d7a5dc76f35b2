"""The perception-reasoning loop and its episode log.

Each tick the loop advances the microworld one step, answers the queries
queued on the previous tick, rebuilds a belief store (carrying over only
support descriptions that earned their keep), saturates it under the
ruleset, captures part exemplars, services goals, and queues the next
round of queries.  Everything it does is appended to a line-delimited log
that is byte-identical across repeated runs of the same scenario.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import DEFAULT_DEPTH_CAP, FixpointReport, run_to_fixpoint
from .errors import ConfigError, PlanError
from .geometry import mask_to_rle
from .parts import (
    DEFAULT_PATCH_RADIUS,
    DEFAULT_TAU,
    ConceptDef,
    DetectorModel,
    DetectorRegistry,
    Exemplar,
    ExemplarStore,
    capture_exemplar,
    train_detector,
)
from .perception import (
    DEFAULT_CONTACT_RADIUS,
    PerceptReport,
    PerceptionQuery,
    perceive,
    sorted_queries,
)
from .planner import DEFAULT_SETTLE_HORIZON, Plan, plan_support, plan_unsupport
from .store import BeliefStore, ReifyRegistry, Triple
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
from .world import Goal, World, load_scenario_file, render

logger = logging.getLogger(__name__)

DEFAULT_MAX_TICKS = 30

_QUERY_PREDICATES = ("relativeMovement", "contact")


@dataclass(frozen=True)
class AgentConfig:
    """Everything a run needs; parsed from flat key=value text."""

    scenario_path: str
    rules_path: str | None = None
    concepts: tuple[ConceptDef, ...] = ()
    detector_models: tuple[tuple[str, str], ...] = ()  # (concept name, model path)
    extra_queries: tuple[tuple[str, str, str | None], ...] = ()
    patch_radius: int = DEFAULT_PATCH_RADIUS
    tau: int = DEFAULT_TAU
    contact_radius: int = DEFAULT_CONTACT_RADIUS
    settle_horizon: int = DEFAULT_SETTLE_HORIZON
    depth_cap: int = DEFAULT_DEPTH_CAP
    max_ticks: int = DEFAULT_MAX_TICKS
    exemplar_dir: str | None = None


def concept_from_text(value: str) -> ConceptDef:
    """Parse ``name:host:partner`` or ``name:host:partner:kind:role``."""
    fields_ = value.split(":")
    if len(fields_) == 3:
        name, host, partner = fields_
        return ConceptDef(name, host, partner)
    if len(fields_) == 5:
        name, host, partner, kind, role = fields_
        return ConceptDef(name, host, partner, kind, role)
    raise ConfigError(f"concept wants name:host:partner[:kind:role], got {value!r}")


def _parse_query(value: str) -> tuple[str, str, str | None]:
    fields_ = value.split(":")
    if len(fields_) != 3:
        raise ConfigError(f"standing_query wants predicate:subject:object, got {value!r}")
    predicate, subject, obj = fields_
    if predicate not in _QUERY_PREDICATES:
        raise ConfigError(f"unknown query predicate: {predicate!r}")
    return predicate, subject, (None if obj in ("", "_") else obj)


_INT_KEYS = {
    "patch_radius",
    "tau",
    "contact_radius",
    "settle_horizon",
    "depth_cap",
    "max_ticks",
}


def parse_config(text: str) -> AgentConfig:
    """Parse flat key=value config text; '#' starts a comment."""
    scalars: dict[str, object] = {}
    concepts: list[ConceptDef] = []
    models: list[tuple[str, str]] = []
    queries: list[tuple[str, str, str | None]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        if key == "concept":
            concepts.append(concept_from_text(value))
        elif key == "detector":
            name, sep2, path = value.partition(":")
            if not sep2 or not name or not path:
                raise ConfigError(f"line {lineno}: detector wants name:path")
            models.append((name, path))
        elif key == "standing_query":
            queries.append(_parse_query(value))
        elif key == "scenario":
            scalars["scenario_path"] = value
        elif key == "rules":
            scalars["rules_path"] = None if value == "default" else value
        elif key == "exemplar_dir":
            scalars["exemplar_dir"] = value
        elif key in _INT_KEYS:
            try:
                scalars[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} wants an integer") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if "scenario_path" not in scalars:
        raise ConfigError("config is missing the scenario key")
    return AgentConfig(
        concepts=tuple(concepts),
        detector_models=tuple(models),
        extra_queries=tuple(queries),
        **scalars,
    )


def load_config(path: str | Path) -> AgentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


@dataclass
class EpisodeLog:
    """Line-delimited record stream: tick, kind, payload, tab-separated."""

    lines: list[str] = field(default_factory=list)

    def add(self, tick: int, kind: str, payload: str) -> None:
        if "\t" in payload or "\n" in payload:
            raise ValueError("log payloads must be single-line and tab-free")
        self.lines.append(f"{tick}\t{kind}\t{payload}")

    def render(self) -> str:
        return "\n".join(self.lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8")


@dataclass
class TickTrace:
    """Everything observable about one loop iteration, for tests and tools."""

    tick: int
    world: World
    report: PerceptReport
    store: BeliefStore
    fixpoint: FixpointReport
    queries: tuple[PerceptionQuery, ...]
    carried: frozenset[Triple]
    dropped: tuple[str, ...]
    exemplars: tuple[Exemplar, ...]
    plans: tuple[Plan, ...]


@dataclass
class Episode:
    world: World
    log: EpisodeLog
    ticks: list[TickTrace]
    exemplars: list[Exemplar]
    detectors: DetectorRegistry
    halted: str = "max-ticks"


def _quiescent(world: World, goals, queries) -> bool:
    if goals or queries:
        return False
    if any(move.tick >= world.tick for move in world.script):
        return False
    return world.all_settled(1)


def _log_report(log: EpisodeLog, tick: int, report: PerceptReport) -> None:
    log.add(tick, "percepts", str(len(report.triples)))
    for triple in sorted(report.triples):
        log.add(tick, "percept", triple.render())
    for a, b in sorted(report.contact_masks):
        log.add(tick, "mask", f"{a} {b} {mask_to_rle(report.contact_masks[(a, b)])}")
    for obj, concept in sorted(report.detections):
        log.add(tick, "detect", f"{obj} {concept} {mask_to_rle(report.detections[(obj, concept)])}")


def _ensure_detector(
    registry: DetectorRegistry,
    config: AgentConfig,
    exemplars: list[Exemplar],
    host_class: str,
    partner_class: str,
) -> bool:
    """Train a matching detector from captured exemplars if none is loaded."""
    if registry.find(host_class, partner_class) is not None:
        return False
    for concept in sorted(config.concepts, key=lambda c: c.name):
        if concept.host_class != host_class or concept.partner_class != partner_class:
            continue
        batch = [e for e in exemplars if e.concept == concept.name]
        if not batch:
            continue
        model = train_detector(batch, radius=config.patch_radius, tau=config.tau)
        registry.register(concept, model)
        return True
    return False


def _service_goal(
    world: World,
    store: BeliefStore,
    goal: Goal,
    config: AgentConfig,
    registry: DetectorRegistry,
    exemplars: list[Exemplar],
    log: EpisodeLog,
) -> tuple[World, Plan]:
    tick = world.tick
    if goal.kind == "support":
        host_class = world.spec(goal.object_id).class_name
        partner_class = world.spec(goal.target).class_name
        if _ensure_detector(registry, config, exemplars, host_class, partner_class):
            log.add(tick, "trained", f"{host_class} part detector vs {partner_class}")
        mode = "part" if registry.find(host_class, partner_class) else "whole"
        plan = plan_support(
            world,
            store,
            ("supportedBy", goal.object_id, goal.target),
            mode=mode,
            detectors=registry,
            settle_horizon=config.settle_horizon,
        )
        if plan.stable:
            world = world.place_object(goal.object_id, plan.pose)
            log.add(tick, "placed", f"{goal.object_id} {plan.pose[0]},{plan.pose[1]}")
        return world, plan
    plan = plan_unsupport(
        world, store, ("removeSupport", goal.object_id), settle_horizon=config.settle_horizon
    )
    world = world.with_script(plan.script)
    return world, plan


def run_loop(config: AgentConfig) -> Episode:
    """Run one episode and return the final world plus the full trace."""
    world = load_scenario_file(config.scenario_path)
    for _, subject, _ in config.extra_queries:
        world.spec(subject)
    if config.extra_queries:
        world = replace(
            world, standing_queries=world.standing_queries + config.extra_queries
        )

    rules = builtin_ruleset() if config.rules_path is None else load_ruleset(config.rules_path)
    registry = ReifyRegistry()
    detectors = DetectorRegistry()
    by_name = {c.name: c for c in config.concepts}
    for name, path in config.detector_models:
        if name not in by_name:
            raise ConfigError(f"detector {name} has no matching concept definition")
        detectors.register(by_name[name], DetectorModel.load(path))
    sink = ExemplarStore(config.exemplar_dir) if config.exemplar_dir else None

    standing = tuple(
        sorted_queries(PerceptionQuery(p, s, o) for p, s, o in set(world.standing_queries))
    )
    log = EpisodeLog()
    log.add(0, "begin", f"grid {world.rows}x{world.cols} objects {','.join(world.object_ids())}")

    queries: list[PerceptionQuery] = list(standing)
    log.add(0, "queries", "; ".join(q.render() for q in queries) or "-")

    pending = list(world.goals)
    exemplars: list[Exemplar] = []
    traces: list[TickTrace] = []
    prev_store: BeliefStore | None = None
    prev_frame = render(world)
    halted = "max-ticks"

    for _ in range(config.max_ticks):
        world = world.step()
        frame = render(world)
        tick = world.tick
        report = perceive(
            prev_frame, frame, queries, detectors=detectors, radius=config.contact_radius
        )
        _log_report(log, tick, report)

        store = base_store(registry)
        inject_world(store, world)
        carried: frozenset[Triple] = frozenset()
        dropped: tuple[str, ...] = ()
        if prev_store is not None:
            kept = persist_schemas(prev_store, report.triples)
            carried = frozenset(kept)
            kept_ids = {t.subject for t in kept if t.predicate == "isa"}
            dropped = tuple(
                sorted(
                    t.subject
                    for t in prev_store.query_pattern("isa", None, "DSupp")
                    if t.subject not in kept_ids
                )
            )
            carry_in(store, prev_store, kept)
            for triple in sorted(kept):
                log.add(tick, "carried", triple.render())
            for situation in dropped:
                log.add(tick, "dropped", situation)
        inject_percepts(store, report)
        inject_goals(store, pending)

        naf = frozenset(
            ("movDir", q.subject) for q in queries if q.predicate == "relativeMovement"
        )
        before = set(store.triples())
        fix = run_to_fixpoint(
            store, rules, naf_scope=naf, tick=tick, depth_cap=config.depth_cap
        )
        log.add(
            tick,
            "fixpoint",
            f"iterations {fix.iterations} derived {fix.derived} "
            f"fixpoint {'yes' if fix.reached_fixpoint else 'no'}",
        )
        for triple in sorted(set(store.triples()) - before):
            log.add(tick, "derived", triple.render())

        captured: list[Exemplar] = []
        for concept in sorted(config.concepts, key=lambda c: c.name):
            exemplar = capture_exemplar(store, report, frame, concept)
            if exemplar is None:
                continue
            captured.append(exemplar)
            exemplars.append(exemplar)
            log.add(
                tick,
                "exemplar",
                f"{exemplar.concept} {exemplar.object_id} {mask_to_rle(exemplar.part_mask)}",
            )
            if sink is not None:
                sink.save(exemplar)

        plans: list[Plan] = []
        for goal in list(pending):
            try:
                world, plan = _service_goal(
                    world, store, goal, config, detectors, exemplars, log
                )
            except PlanError as exc:
                log.add(tick, "plan-error", f"{goal.kind} {goal.object_id} {exc}")
                continue
            plans.append(plan)
            pending.remove(goal)
            for line in plan.render().splitlines():
                log.add(tick, "plan", line)
            if goal.kind == "support" and not plan.stable:
                log.add(tick, "abandoned", f"{goal.kind} {goal.object_id}")

        queries = sorted_queries(emit_queries(store, standing))
        log.add(tick, "queries", "; ".join(q.render() for q in queries) or "-")

        traces.append(
            TickTrace(
                tick=tick,
                world=world,
                report=report,
                store=store,
                fixpoint=fix,
                queries=tuple(queries),
                carried=carried,
                dropped=dropped,
                exemplars=tuple(captured),
                plans=tuple(plans),
            )
        )
        prev_store = store
        prev_frame = render(world)

        if _quiescent(world, pending, queries):
            halted = "quiescent"
            log.add(tick, "halt", "quiescent")
            break
    else:
        log.add(world.tick, "halt", "max-ticks")

    if prev_store is not None:
        for line in prev_store.dump().splitlines():
            log.add(world.tick, "store", line)
    return Episode(
        world=world,
        log=log,
        ticks=traces,
        exemplars=exemplars,
        detectors=detectors,
        halted=halted,
    )
