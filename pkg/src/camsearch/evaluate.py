"""Post-hoc evaluation: external score composite, success rate, common-completed
filtering, per-category aggregation, and the controlled baseline policies.

External scorers are pluggable commands mapping an image path to three scores;
a deterministic synthetic scorer derived from the stub reviewer's geometric
signals ships for end-to-end tests.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import advisors
from .advisors import StubAdvisorClient, stub_visual_scores
from .anchors import build_anchor_bank
from .blueprint import MissionSpec, build_blueprint_rule_based
from .camera import CameraState, rule_signals
from .render import RenderError, RenderRequest, render, render_parallel
from .scene import SceneModel, topology_summary
from .search import (FinalResult, SearchConfig, internal_score, run_search,
                     select_final_ratio, Incumbent)

COMPOSITE_WEIGHTS = (0.40, 0.20, 0.40)  # aesthetics, quality, structure
SUCCESS_THRESHOLD = 0.55

BASELINE_POLICIES = ("single_step", "single_chain", "anchor_best_of_n", "random_search")
RANDOM_SEARCH_BUDGET = 24


@dataclass(frozen=True)
class ExternalScores:
    iaa: float
    iqa: float
    ista: float
    source: str = "synthetic"

    def __post_init__(self):
        for v in (self.iaa, self.iqa, self.ista):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"external score {v} outside [0, 1]")


@dataclass
class TaskResult:
    mission_id: str
    method: str
    completed: bool
    scores: Optional[ExternalScores] = None
    failure_category: Optional[str] = None
    category: Optional[str] = None

    def __post_init__(self):
        if self.completed and self.scores is None:
            raise ValueError("completed results must carry scores")

    @property
    def m_qs(self) -> Optional[float]:
        return quality_composite(self.scores) if self.scores is not None else None


def quality_composite(scores: ExternalScores) -> float:
    wa, wq, ws = COMPOSITE_WEIGHTS
    return wa * scores.iaa + wq * scores.iqa + ws * scores.ista


def success_at(results, threshold: float = SUCCESS_THRESHOLD) -> float:
    values = [r.m_qs for r in results if r.completed]
    if not values:
        raise ValueError("success_at needs at least one completed result")
    return sum(1 for v in values if v >= threshold) / len(values)


def common_completed_filter(results_by_method: dict) -> tuple:
    """(retained mission ids, excluded log). Order-independent intersection of
    completed ids across all methods; exclusions carry per-method categories."""
    if len(results_by_method) < 2:
        raise ValueError("common-completed filtering needs at least two methods")
    completed_sets = []
    all_ids = set()
    for results in results_by_method.values():
        ids = {r.mission_id for r in results if r.completed}
        completed_sets.append(ids)
        all_ids |= {r.mission_id for r in results}
    retained = set.intersection(*completed_sets)
    excluded = {}
    for mission_id in sorted(all_ids - retained):
        excluded[mission_id] = {
            method: next((r.failure_category or ("completed" if r.completed else "missing")
                          for r in results if r.mission_id == mission_id), "missing")
            for method, results in results_by_method.items()
        }
    return sorted(retained), excluded


def synthetic_scores(scene: SceneModel, mission: MissionSpec,
                     camera: CameraState) -> ExternalScores:
    """Deterministic external proxy built from the stub reviewer's geometry signals."""
    topo = topology_summary(scene)
    blueprint = build_blueprint_rule_based(mission, scene, topo)
    m3, m4, m5, m6 = stub_visual_scores(camera, scene, blueprint, mission)
    return ExternalScores(iaa=m5, iqa=m4, ista=0.5 * m3 + 0.5 * m6, source="synthetic")


def command_scores(command, image_path: str) -> ExternalScores:
    """Run an external scorer command; expects JSON {iaa, iqa, ista} on stdout."""
    proc = subprocess.run(list(command) + [image_path], capture_output=True, timeout=600)
    if proc.returncode != 0:
        raise RuntimeError(f"scorer exited {proc.returncode}")
    doc = json.loads(proc.stdout.decode("utf-8"))
    return ExternalScores(iaa=float(doc["iaa"]), iqa=float(doc["iqa"]),
                          ista=float(doc["ista"]), source=" ".join(command))


def _score_camera(scene, mission, blueprint, client, camera, preview) -> float:
    spec = mission.eval_spec
    subject = None
    subject_id = blueprint.primary_subject or spec.primary_subject
    if subject_id is not None and scene.has_object(subject_id):
        subject = scene.object_by_id(subject_id)
    placement = spec.placement_pref if spec.placement_pref in ("left", "right", "top", "bottom") else None
    composition = spec.placement_pref if (spec.placement_pref or "").startswith("thirds") else None
    rules = rule_signals(camera, scene, subject, placement_pref=placement,
                         composition_pref=composition, eval_spec=spec)
    review = advisors.review_image(client, camera, preview, mission)
    return internal_score(float(rules.m1), rules.m2, review.m3, review.m4,
                          review.m5, review.m6)


def _finalize(scene, mission, policy, camera, best_score, preview_count,
              out_dir, render_fn) -> FinalResult:
    from .camera import project_box
    topo = topology_summary(scene)
    blueprint = build_blueprint_rule_based(mission, scene, topo)
    subject_id = blueprint.primary_subject
    box = None
    if subject_id is not None and scene.has_object(subject_id):
        box = project_box(camera, scene.object_by_id(subject_id))
    pseudo = Incumbent(camera=camera, internal_score=best_score,
                       signals=(0, 0, 0, 0, 0, 0),
                       subject_box_coverage=box.coverage if box else 0.0,
                       subject_box_aspect=(box.u_max - box.u_min) / max(box.v_max - box.v_min, 1e-9)
                       if box else 1.0)
    ratio = select_final_ratio(mission.aspect_set, scene, topo, pseudo)
    final_camera = camera.with_aspect(ratio)
    final_render = render_fn(scene, RenderRequest(camera=final_camera, quality="final"))
    final_image_path = None
    from .blueprint import mission_to_dict
    log = {
        "mission_id": mission.mission_id,
        "scene_ref": mission.scene_ref,
        "category": mission.category,
        "mission": mission_to_dict(mission),
        "policy": policy,
        "diagnostics": {"preview_renders": preview_count},
        "final": {"camera": final_camera.to_dict(), "ratio": ratio,
                  "internal_score": best_score,
                  "image": f"{mission.mission_id}_final.png"},
    }
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
        final_image_path = os.path.join(out_dir, f"{mission.mission_id}_final.png")
        final_render.save(final_image_path)
        from .search import serialize_log
        with open(os.path.join(out_dir, f"{mission.mission_id}_run.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(serialize_log(log))
    return FinalResult(mission_id=mission.mission_id, camera=final_camera, ratio=ratio,
                       internal_score=best_score, log=log, final_render=final_render,
                       final_image_path=final_image_path)


def run_baseline(policy: str, mission: MissionSpec, scene: SceneModel,
                 rng_seed: int = 0, out_dir=None, render_fn=render,
                 workers: int = 1) -> FinalResult:
    """Controlled baselines sharing the engine's scene / bank / reviewer machinery."""
    if policy not in BASELINE_POLICIES:
        raise ValueError(f"unknown baseline policy {policy!r}")

    if policy == "single_chain":
        config = SearchConfig(rounds=6, candidates_per_round=1, rng_seed=rng_seed,
                              high_explore_enabled=False, region_memory_enabled=False,
                              workers=workers)
        result = run_search(mission, scene, config, out_dir=out_dir, render_fn=render_fn)
        result.log["policy"] = policy
        return result

    topo = topology_summary(scene)
    blueprint = build_blueprint_rule_based(mission, scene, topo)
    from .regions import cell_size
    client = StubAdvisorClient(scene, blueprint, mission, rng_seed=rng_seed,
                               h=cell_size(scene.scene_scale))
    bank = build_anchor_bank(scene, blueprint, topo)
    rng = np.random.default_rng(rng_seed)

    def camera_for_anchor(anchor) -> CameraState:
        aspect = anchor.aspect_hint if anchor.aspect_hint in mission.aspect_set else mission.aspect_set[0]
        return CameraState(p=anchor.position, l=anchor.look_at,
                           f=anchor.focal_hint, d=5.6, r=aspect)

    if policy == "single_step":
        camera = camera_for_anchor(bank[0])
        preview = render_fn(scene, RenderRequest(camera=camera))
        score = _score_camera(scene, mission, blueprint, client, camera, preview)
        return _finalize(scene, mission, policy, camera, score, 1, out_dir, render_fn)

    if policy == "anchor_best_of_n":
        cameras = [camera_for_anchor(a) for a in bank]
    else:  # random_search: uniform positions in 1.5x scene box, aimed at scene content
        lo, hi = scene.scene_aabb_min, scene.scene_aabb_max
        center = scene.centroid
        half = np.maximum((hi - lo) / 2.0, 1e-6) * 1.5
        cameras = []
        for _ in range(RANDOM_SEARCH_BUDGET):
            pos = center + rng.uniform(-1.0, 1.0, 3) * half
            target_obj = scene.objects[int(rng.integers(len(scene.objects)))]
            look = target_obj.center
            if float(np.linalg.norm(pos - look)) < 1e-6:
                pos = pos + half * 0.01 + 1e-3
            cameras.append(CameraState(p=pos, l=look, f=35.0, d=5.6,
                                       r=mission.aspect_set[0]))

    previews = render_parallel(scene, [RenderRequest(camera=c) for c in cameras],
                               workers=workers, render_fn=render_fn)
    best_camera, best_score = None, -1.0
    for camera, preview in zip(cameras, previews):
        if isinstance(preview, RenderError):
            continue
        score = _score_camera(scene, mission, blueprint, client, camera, preview)
        if score > best_score:
            best_camera, best_score = camera, score
    if best_camera is None:
        from .search import SearchAbort
        raise SearchAbort("no_first_image")
    return _finalize(scene, mission, policy, best_camera, best_score,
                     len(cameras), out_dir, render_fn)


def _mean_std(values) -> tuple:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def aggregate_report(results_by_method: dict, categories: Optional[dict] = None,
                     diagnostics_by_method: Optional[dict] = None,
                     threshold: float = SUCCESS_THRESHOLD) -> dict:
    """Overall, per-category, paired-win, and diagnostics tables.

    `categories` maps mission_id -> category; `diagnostics_by_method` maps
    method -> list of (coverage, collapse, revisit)."""
    methods = sorted(results_by_method)
    if len(methods) >= 2:
        retained, excluded = common_completed_filter(results_by_method)
    else:
        retained = sorted(r.mission_id for r in results_by_method[methods[0]] if r.completed)
        excluded = {}
    retained_set = set(retained)

    overall = {}
    per_category = {}
    for method in methods:
        rows = [r for r in results_by_method[method]
                if r.mission_id in retained_set and r.completed]
        rows.sort(key=lambda r: r.mission_id)
        if not rows:
            overall[method] = None
            continue
        mean, std = _mean_std([r.m_qs for r in rows])
        overall[method] = {
            "m_qs_mean": mean,
            "m_qs_std": std,
            "succ": success_at(rows, threshold),
            "iaa": float(np.mean([r.scores.iaa for r in rows])),
            "iqa": float(np.mean([r.scores.iqa for r in rows])),
            "ista": float(np.mean([r.scores.ista for r in rows])),
            "n": len(rows),
        }
        by_cat = {}
        for r in rows:
            cat = r.category or (categories or {}).get(r.mission_id, "uncategorized")
            by_cat.setdefault(cat, []).append(r.m_qs)
        per_category[method] = {cat: float(np.mean(vals))
                                for cat, vals in sorted(by_cat.items())}

    # paired wins on strict inequality; ties counted to neither
    paired_wins = {}
    for i, a in enumerate(methods):
        for b in methods[i + 1:]:
            qa = {r.mission_id: r.m_qs for r in results_by_method[a]
                  if r.mission_id in retained_set and r.completed}
            qb = {r.mission_id: r.m_qs for r in results_by_method[b]
                  if r.mission_id in retained_set and r.completed}
            common = sorted(set(qa) & set(qb))
            wins_a = sum(1 for m in common if qa[m] > qb[m])
            wins_b = sum(1 for m in common if qb[m] > qa[m])
            paired_wins[f"{a} vs {b}"] = {"wins_a": wins_a, "wins_b": wins_b,
                                          "ties": len(common) - wins_a - wins_b,
                                          "n": len(common)}

    category_balance = {}
    for mission_id in retained:
        cat = (categories or {}).get(mission_id, "uncategorized")
        category_balance[cat] = category_balance.get(cat, 0) + 1

    diagnostics = {}
    if diagnostics_by_method:
        for method, triples in sorted(diagnostics_by_method.items()):
            triples = [t for t in triples if all(v is not None for v in t)]
            if triples:
                arr = np.asarray(triples, dtype=float)
                diagnostics[method] = {"coverage": float(arr[:, 0].mean()),
                                       "collapse": float(arr[:, 1].mean()),
                                       "revisit": float(arr[:, 2].mean())}

    return {
        "retained": retained,
        "excluded": excluded,
        "category_balance": category_balance,
        "overall": overall,
        "per_category": per_category,
        "paired_wins": paired_wins,
        "diagnostics": diagnostics,
        "threshold": threshold,
    }


def report_text(report: dict) -> str:
    """Plain-text rendering of an aggregate report."""
    lines = []
    lines.append(f"retained tasks: {len(report['retained'])} "
                 f"(excluded {len(report['excluded'])})")
    lines.append(f"{'method':<24}{'m_qs':>8}{'std':>8}{'succ':>8}"
                 f"{'iaa':>8}{'iqa':>8}{'ista':>8}{'n':>6}")
    for method, row in sorted(report["overall"].items()):
        if row is None:
            lines.append(f"{method:<24}{'-':>8}")
            continue
        lines.append(f"{method:<24}{row['m_qs_mean']:>8.3f}{row['m_qs_std']:>8.3f}"
                     f"{row['succ']:>8.3f}{row['iaa']:>8.3f}{row['iqa']:>8.3f}"
                     f"{row['ista']:>8.3f}{row['n']:>6d}")
    if report["per_category"]:
        lines.append("")
        lines.append("per-category m_qs means:")
        for method, cats in sorted(report["per_category"].items()):
            cat_str = "  ".join(f"{c}={v:.3f}" for c, v in sorted(cats.items()))
            lines.append(f"  {method:<22}{cat_str}")
    if report["paired_wins"]:
        lines.append("")
        for pair, row in sorted(report["paired_wins"].items()):
            lines.append(f"  {pair}: {row['wins_a']}-{row['wins_b']} "
                         f"(ties {row['ties']}, n {row['n']})")
    if report["diagnostics"]:
        lines.append("")
        lines.append("search diagnostics (artifact-defined):")
        for method, row in sorted(report["diagnostics"].items()):
            lines.append(f"  {method:<22}coverage={row['coverage']:.3f} "
                         f"collapse={row['collapse']:.3f} revisit={row['revisit']:.3f}")
    return "\n".join(lines) + "\n"
