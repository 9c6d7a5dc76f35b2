"""Command-line entry points.

Verbs:
  run          drive the perception-reasoning loop over a scenario
  saturate     run the rules to fixpoint over a belief-store dump
  plan         compute a support or unsupport plan for a scenario
  train-part   fit a part detector from saved exemplars
  detect-part  apply a saved detector to a scenario frame
  deps         entities every belief path between two entities crosses
  explain      derivation tree for one triple, re-derived from base facts

Figures (``--figures DIR``) are written next to whatever the verb prints.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .agent import AgentConfig, concept_from_text, load_config, run_loop
from .engine import (
    DEFAULT_DEPTH_CAP,
    explain,
    render_explanation,
    run_to_fixpoint,
)
from .errors import SchemaWorldError
from .geometry import mask_to_rle
from .parts import DetectorModel, DetectorRegistry, ExemplarStore, detect, train_detector
from .planner import plan_support, plan_unsupport
from .store import NEG, POS, BeliefStore, ReifyRegistry, Triple
from .theory import builtin_ruleset, load_ruleset
from .vocab import FLOOR_ID
from .world import World, load_scenario_file, render


def _ruleset(name: str):
    return builtin_ruleset() if name == "default" else load_ruleset(name)


def _naf_scope(values) -> frozenset[tuple[str, str]]:
    scope = set()
    for value in values or ():
        predicate, sep, subject = value.partition(":")
        if not sep or not predicate or not subject:
            raise SchemaWorldError(f"--naf wants predicate:subject, got {value!r}")
        scope.add((predicate, subject))
    return frozenset(scope)


def _parse_triple(text: str) -> Triple:
    fields = text.split()
    if len(fields) != 4 or fields[0] not in (POS, NEG):
        raise SchemaWorldError(
            f"triple wants '<pos|neg> <predicate> <subject> <object>', got {text!r}"
        )
    return Triple(*fields)


def _apply_places(world: World, values) -> World:
    for value in values or ():
        parts = value.split(":")
        if len(parts) != 3:
            raise SchemaWorldError(f"--place wants object:row:col, got {value!r}")
        object_id, row, col = parts
        world = world.place_object(object_id, (int(row), int(col)))
    return world


def _cmd_run(args) -> int:
    if args.config:
        config = load_config(args.config)
        if args.scenario:
            config = replace(config, scenario_path=args.scenario)
    elif args.scenario:
        config = AgentConfig(scenario_path=args.scenario)
    else:
        raise SchemaWorldError("run needs --scenario or --config")
    if args.max_ticks is not None:
        config = replace(config, max_ticks=args.max_ticks)
    if args.exemplars:
        config = replace(config, exemplar_dir=args.exemplars)

    episode = run_loop(config)

    if args.dump_percepts:
        for trace in episode.ticks:
            print(trace.report.dump())
            print()
    if args.log:
        episode.log.save(args.log)
        print(f"halt {episode.halted} tick {episode.world.tick}")
    else:
        sys.stdout.write(episode.log.render())

    if args.figures:
        from . import report

        out = Path(args.figures)
        frame = render(episode.world)
        report.save_frame_figure(frame, out / "frame_final.png")
        if episode.ticks:
            last = episode.ticks[-1].report
            grouped: dict[str, dict] = {}
            for (obj, concept), mask in last.detections.items():
                grouped.setdefault(obj, {})[concept] = mask
            for obj, found in sorted(grouped.items()):
                report.save_detection_figure(frame, found, out / f"detect_{obj}.png")
            for trace in episode.ticks:
                for plan in trace.plans:
                    if plan.verdicts:
                        report.save_census_figure(
                            trace.world,
                            render(trace.world),
                            plan,
                            out / f"census_{plan.object_id}_{trace.tick}.png",
                        )
    return 0


def _cmd_saturate(args) -> int:
    store = BeliefStore.load(Path(args.store).read_text(encoding="utf-8"))
    before = set(store.triples())
    fix = run_to_fixpoint(
        store,
        _ruleset(args.rules),
        naf_scope=_naf_scope(args.naf),
        tick=args.tick,
        depth_cap=args.depth_cap,
    )
    for triple in sorted(set(store.triples()) - before):
        print(triple.render())
    print(fix.render())
    return 0


def _cmd_plan(args) -> int:
    goal_fields = args.goal.split(":")
    world = load_scenario_file(args.scenario)

    if goal_fields[0] == "support":
        if len(goal_fields) != 3:
            raise SchemaWorldError("support goal wants support:<object>:<target>")
        _, object_id, target_id = goal_fields
        world = _apply_places(world, args.place)
        registry = None
        if args.mode == "part":
            if not (args.concept and args.model):
                raise SchemaWorldError("part mode wants --concept and --model")
            registry = DetectorRegistry()
            registry.register(
                concept_from_text(args.concept), DetectorModel.load(args.model)
            )
        plan = plan_support(
            world,
            None,
            ("supportedBy", object_id, target_id),
            mode=args.mode,
            detectors=registry,
        )
        sys.stdout.write(plan.render())
        if args.figures:
            from . import report

            report.save_census_figure(
                world, render(world), plan, Path(args.figures) / "census.png"
            )
        return 0

    if goal_fields[0] == "unsupport":
        if len(goal_fields) != 2:
            raise SchemaWorldError("unsupport goal wants unsupport:<object>")
        _, object_id = goal_fields
        # watch the object for a few ticks so a support belief can form
        config = AgentConfig(
            scenario_path=args.scenario,
            extra_queries=(
                ("relativeMovement", object_id, FLOOR_ID),
                ("contact", object_id, None),
            ),
            max_ticks=args.bootstrap_ticks,
        )
        episode = run_loop(config)
        if not episode.ticks:
            raise SchemaWorldError("scenario produced no ticks to observe")
        plan = plan_unsupport(
            episode.world, episode.ticks[-1].store, ("removeSupport", object_id)
        )
        sys.stdout.write(plan.render())
        return 0

    raise SchemaWorldError(f"goal must start with support: or unsupport:, got {args.goal!r}")


def _cmd_train_part(args) -> int:
    exemplars = ExemplarStore(args.exemplars).load_all(args.concept)
    model = train_detector(exemplars, radius=args.radius, tau=args.tau)
    model.save(args.out)
    print(
        f"trained {model.concept} on {len(exemplars)} exemplars: "
        f"{len(model.positives)} positive, {len(model.negatives)} negative patches"
    )
    return 0


def _cmd_detect_part(args) -> int:
    model = DetectorModel.load(args.model)
    world = _apply_places(load_scenario_file(args.scenario), args.place)
    frame = render(world)
    mask = detect(model, frame, args.object)
    print(f"{args.object} {model.concept} {mask_to_rle(mask)}")
    if args.figures:
        from . import report

        report.save_detection_figure(
            frame, {model.concept: mask} if mask else {}, Path(args.figures) / "detect.png"
        )
    return 0


def _cmd_deps(args) -> int:
    store = BeliefStore.load(Path(args.store).read_text(encoding="utf-8"))
    cut = store.dependency_query(args.a, args.b)
    if not cut:
        print("-")
    for entity in cut:
        print(entity)
    return 0


def _cmd_explain(args) -> int:
    dumped = BeliefStore.load(Path(args.store).read_text(encoding="utf-8"))
    # rebuild from non-inferred facts so the derivation tree is available
    store = BeliefStore(registry=ReifyRegistry())
    for entity in dumped.entities():
        if not store.has_entity(entity):
            store.register_entity(entity, dumped.entity_kind(entity))
    for triple in dumped.triples():
        provenance = dumped.provenance(triple)
        if provenance.origin != "inferred":
            store.assert_triple(
                triple.polarity, triple.predicate, triple.subject, triple.object, provenance
            )
    run_to_fixpoint(
        store,
        _ruleset(args.rules),
        naf_scope=_naf_scope(args.naf),
        tick=args.tick,
        depth_cap=args.depth_cap,
    )
    node = explain(store, _parse_triple(args.triple))
    print(render_explanation(node))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schemaworld",
        description="Deterministic grid microworld with a perceiving, rule-driven agent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="drive the loop over a scenario")
    p_run.add_argument("--scenario", help="scenario JSON path")
    p_run.add_argument("--config", help="flat key=value config path")
    p_run.add_argument("--max-ticks", type=int, default=None)
    p_run.add_argument("--log", help="write the episode log here instead of stdout")
    p_run.add_argument("--dump-percepts", action="store_true")
    p_run.add_argument("--exemplars", help="directory to save captured exemplars")
    p_run.add_argument("--figures", help="directory for rendered figures")
    p_run.set_defaults(func=_cmd_run)

    p_sat = sub.add_parser("saturate", help="saturate a belief-store dump")
    p_sat.add_argument("store", help="belief-store dump path")
    p_sat.add_argument("--rules", default="default", help="'default' or a rules path")
    p_sat.add_argument("--naf", action="append", help="predicate:subject; repeatable")
    p_sat.add_argument("--tick", type=int, default=0)
    p_sat.add_argument("--depth-cap", type=int, default=DEFAULT_DEPTH_CAP)
    p_sat.set_defaults(func=_cmd_saturate)

    p_plan = sub.add_parser("plan", help="plan support or unsupport moves")
    p_plan.add_argument("--scenario", required=True)
    p_plan.add_argument("--goal", required=True, help="support:<obj>:<target> or unsupport:<obj>")
    p_plan.add_argument("--mode", choices=("whole", "part"), default="whole")
    p_plan.add_argument("--place", action="append", help="object:row:col; repeatable")
    p_plan.add_argument("--concept", help="name:host:partner for part mode")
    p_plan.add_argument("--model", help="detector model path for part mode")
    p_plan.add_argument("--bootstrap-ticks", type=int, default=5)
    p_plan.add_argument("--figures")
    p_plan.set_defaults(func=_cmd_plan)

    p_train = sub.add_parser("train-part", help="train a part detector")
    p_train.add_argument("--exemplars", required=True, help="exemplar directory")
    p_train.add_argument("--concept", required=True)
    p_train.add_argument("--out", required=True, help="model output path")
    p_train.add_argument("--radius", type=int, default=2)
    p_train.add_argument("--tau", type=int, default=2)
    p_train.set_defaults(func=_cmd_train_part)

    p_det = sub.add_parser("detect-part", help="apply a detector to a scenario")
    p_det.add_argument("--model", required=True)
    p_det.add_argument("--scenario", required=True)
    p_det.add_argument("--object", required=True)
    p_det.add_argument("--place", action="append")
    p_det.add_argument("--figures")
    p_det.set_defaults(func=_cmd_detect_part)

    p_deps = sub.add_parser("deps", help="cut entities between two entities")
    p_deps.add_argument("store")
    p_deps.add_argument("a")
    p_deps.add_argument("b")
    p_deps.set_defaults(func=_cmd_deps)

    p_exp = sub.add_parser("explain", help="derivation tree for a triple")
    p_exp.add_argument("store")
    p_exp.add_argument("triple", help="'pos predicate subject object'")
    p_exp.add_argument("--rules", default="default")
    p_exp.add_argument("--naf", action="append")
    p_exp.add_argument("--tick", type=int, default=0)
    p_exp.add_argument("--depth-cap", type=int, default=DEFAULT_DEPTH_CAP)
    p_exp.set_defaults(func=_cmd_explain)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaWorldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
