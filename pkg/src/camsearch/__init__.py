"""Closed-loop camera search over parametric box scenes.

A Director proposes candidate cameras from anchors, region memory, and a
forced high-explore lane; a Reviewer scores rendered previews with rule and
visual signals and performs pairwise incumbent selection; a Reflector turns
failures into region labels and forbidden zones. The whole loop runs under a
fixed render budget with deterministic built-in advisors and renderer.
"""

from .scene import (SceneModel, SceneObject, TopologySummary, load_scene, save_scene,
                    geometric_summary, topology_summary)
from .camera import (CameraState, ScreenBox, RuleSignals, project_point, project_box,
                     rule_m1, rule_m2, hard_failure_check)
from .blueprint import (Blueprint, EvaluationSpec, MissionSpec, load_mission,
                        save_mission, load_mission_registry, save_mission_registry,
                        build_blueprint_rule_based, build_blueprint_advised)
from .anchors import Anchor, anchor_prior, build_anchor_bank
from .regions import (ForbiddenZone, RegionMemory, RegionRecord, cell_size,
                      region_key, relabel, search_diagnostics)
from .advisors import (CandidateProposal, RoundFeedback, VisualReview,
                       StubAdvisorClient, RemoteAdvisorClient,
                       propose, review_image, reflect_round, compare_pairwise)
from .render import (RenderRequest, RenderResult, RenderError, SubprocessBackend,
                     render, render_parallel, resolution_for)
from .search import (FinalResult, Incumbent, SearchConfig, Seed, internal_score,
                     high_explore_priority, build_seed_pool, run_search,
                     select_final_ratio)
from .evaluate import (ExternalScores, TaskResult, quality_composite, success_at,
                       common_completed_filter, run_baseline, aggregate_report,
                       synthetic_scores)

__version__ = "0.1.0"

__all__ = [
    "SceneModel", "SceneObject", "TopologySummary", "load_scene", "save_scene",
    "geometric_summary", "topology_summary",
    "CameraState", "ScreenBox", "RuleSignals", "project_point", "project_box",
    "rule_m1", "rule_m2", "hard_failure_check",
    "Blueprint", "EvaluationSpec", "MissionSpec", "load_mission", "save_mission",
    "load_mission_registry", "save_mission_registry",
    "build_blueprint_rule_based", "build_blueprint_advised",
    "Anchor", "anchor_prior", "build_anchor_bank",
    "ForbiddenZone", "RegionMemory", "RegionRecord", "cell_size", "region_key",
    "relabel", "search_diagnostics",
    "CandidateProposal", "RoundFeedback", "VisualReview",
    "StubAdvisorClient", "RemoteAdvisorClient",
    "propose", "review_image", "reflect_round", "compare_pairwise",
    "RenderRequest", "RenderResult", "RenderError", "SubprocessBackend",
    "render", "render_parallel", "resolution_for",
    "FinalResult", "Incumbent", "SearchConfig", "Seed", "internal_score",
    "high_explore_priority", "build_seed_pool", "run_search", "select_final_ratio",
    "ExternalScores", "TaskResult", "quality_composite", "success_at",
    "common_completed_filter", "run_baseline", "aggregate_report", "synthetic_scores",
]
