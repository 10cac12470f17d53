"""Command-line entry points: `camsearch run` and `camsearch eval`."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .advisors import RemoteAdvisorClient
from .blueprint import load_mission
from .evaluate import (ExternalScores, TaskResult, aggregate_report, command_scores,
                       report_text, synthetic_scores)
from .scene import load_scene
from .search import SearchConfig, run_search
from .camera import CameraState


def _add_run_parser(sub):
    p = sub.add_parser("run", help="run one budgeted camera search")
    p.add_argument("--mission", required=True, help="mission document (JSON)")
    p.add_argument("--scene", required=True, help="scene document (JSON)")
    p.add_argument("--out", required=True, help="output directory for log and images")
    p.add_argument("--rounds", type=int, default=6)
    p.add_argument("--candidates", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-high-explore", action="store_true")
    p.add_argument("--no-region-memory", action="store_true")
    p.add_argument("--advisor", default="stub",
                   help="'stub' or the URL of a remote advisor endpoint")


def _add_eval_parser(sub):
    p = sub.add_parser("eval", help="aggregate run logs into a report")
    p.add_argument("--runs", required=True,
                   help="directory with one subdirectory of run logs per method")
    p.add_argument("--scorer", default="synthetic",
                   help="'synthetic' or an external scorer command")
    p.add_argument("--threshold", type=float, default=0.55)
    p.add_argument("--report", required=True, help="report output path (JSON + .txt)")


def _cmd_run(args) -> int:
    mission = load_mission(args.mission)
    scene = load_scene(args.scene)
    config = SearchConfig(
        rounds=args.rounds, candidates_per_round=args.candidates,
        rng_seed=args.seed, workers=args.workers,
        high_explore_enabled=not args.no_high_explore,
        region_memory_enabled=not args.no_region_memory)
    client = None if args.advisor == "stub" else RemoteAdvisorClient(args.advisor)
    result = run_search(mission, scene, config, client=client, out_dir=args.out)
    print(f"{mission.mission_id}: internal score {result.internal_score:.3f}, "
          f"ratio {result.ratio:.3f}, final image {result.final_image_path}")
    return 0


def _load_method_results(method_dir: str, scorer, scenes_cache: dict):
    results = []
    diagnostics = []
    categories = {}
    for name in sorted(os.listdir(method_dir)):
        if not name.endswith("_run.json"):
            continue
        with open(os.path.join(method_dir, name), "r", encoding="utf-8") as fh:
            log = json.load(fh)
        mission_id = log["mission_id"]
        category = log.get("category")
        categories[mission_id] = category
        diag = log.get("diagnostics", {})
        if all(key in diag and diag[key] is not None
               for key in ("coverage", "collapse", "revisit")):
            diagnostics.append((diag["coverage"], diag["collapse"], diag["revisit"]))
        final = log.get("final")
        if final is None:
            results.append(TaskResult(mission_id=mission_id,
                                      method=os.path.basename(method_dir),
                                      completed=False,
                                      failure_category=log.get("failure_category"),
                                      category=category))
            continue
        image_path = os.path.join(method_dir, final.get("image", ""))
        scores = scorer(log, image_path)
        results.append(TaskResult(mission_id=mission_id,
                                  method=os.path.basename(method_dir),
                                  completed=True, scores=scores,
                                  category=category))
    return results, diagnostics, categories


def _make_scorer(spec: str):
    if spec == "synthetic":
        from .blueprint import mission_from_dict
        from .scene import load_scene as _load

        scene_cache = {}

        def scorer(log, image_path) -> ExternalScores:
            scene_ref = log["scene_ref"]
            if scene_ref not in scene_cache:
                if scene_ref.startswith("synthetic://"):
                    from .synthetic import make_scene
                    scene_cache[scene_ref] = make_scene(int(scene_ref.split("//", 1)[1]))
                else:
                    scene_cache[scene_ref] = _load(scene_ref)
            mission_doc = log.get("mission")
            if mission_doc is not None:
                mission = mission_from_dict(mission_doc)
            else:
                # rebuild a minimal mission from the log for scoring
                from .blueprint import EvaluationSpec, MissionSpec
                mission = MissionSpec(
                    mission_id=log["mission_id"], scene_ref=scene_ref,
                    instruction="", aspect_set=(log["final"]["ratio"],),
                    eval_spec=EvaluationSpec(), category="subject_placement")
            camera = CameraState.from_dict(log["final"]["camera"])
            return synthetic_scores(scene_cache[scene_ref], mission, camera)

        return scorer

    import shlex
    command = shlex.split(spec)

    def scorer(log, image_path) -> ExternalScores:
        return command_scores(command, image_path)

    return scorer


def _cmd_eval(args) -> int:
    scorer = _make_scorer(args.scorer)
    results_by_method = {}
    diagnostics_by_method = {}
    all_categories = {}
    for method in sorted(os.listdir(args.runs)):
        method_dir = os.path.join(args.runs, method)
        if not os.path.isdir(method_dir):
            continue
        results, diagnostics, categories = _load_method_results(method_dir, scorer, {})
        if results:
            results_by_method[method] = results
            all_categories.update({k: v for k, v in categories.items() if v})
            if diagnostics:
                diagnostics_by_method[method] = diagnostics
    if not results_by_method:
        print("no run logs found", file=sys.stderr)
        return 1
    report = aggregate_report(results_by_method, categories=all_categories,
                              diagnostics_by_method=diagnostics_by_method,
                              threshold=args.threshold)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = report_text(report)
    with open(args.report + ".txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="camsearch",
                                     description="budgeted closed-loop camera search")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)
    _add_eval_parser(sub)
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_eval(args)


if __name__ == "__main__":
    sys.exit(main())
