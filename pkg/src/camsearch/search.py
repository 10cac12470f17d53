"""Finite-horizon Director-Reviewer-Reflector search over camera states.

Each round: build a mixed seed pool (exploit / explore / forced high-explore),
ask the proposer for K candidates, render previews in parallel, score with
rule signals plus visual review, challenge the incumbent pairwise, reflect,
and update region memory. The run log is the bit-exact audit artifact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import advisors
from .advisors import CandidateProposal, RoundFeedback, StubAdvisorClient
from .anchors import Anchor, build_anchor_bank
from .blueprint import (Blueprint, MissionSpec, build_blueprint_advised,
                        build_blueprint_rule_based)
from .camera import CameraState, project_box, rule_signals
from .regions import (DEAD, PROMISING, UNKNOWN, NullRegionMemory, RegionMemory,
                      cell_size, region_key)
from .render import RenderError, RenderRequest, RenderResult, render, render_parallel
from .scene import SceneModel, TopologySummary, topology_summary, topology_to_dict

INTERNAL_WEIGHTS = (0.10, 0.10, 0.15, 0.15, 0.25, 0.25)

# Eq-style high-explore priority constants
UNKNOWN_BONUS = 1.2
KNOWN_BONUS = 0.25
DISTANCE_CAP = 2.0
VISIT_PENALTY = 0.35
PROMISING_PENALTY = 0.40


class SearchAbort(RuntimeError):
    """Fatal renderer outage: no round ever produced a preview."""

    def __init__(self, category: str = "no_first_image"):
        super().__init__(category)
        self.category = category


@dataclass(frozen=True)
class SearchConfig:
    rounds: int = 6
    candidates_per_round: int = 4
    explore_ratio_init: float = 0.35
    workers: int = 1
    rng_seed: int = 0
    high_explore_enabled: bool = True
    region_memory_enabled: bool = True

    def __post_init__(self):
        if self.rounds < 1 or self.candidates_per_round < 1:
            raise ValueError("rounds and candidates_per_round must be >= 1")

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "candidates_per_round": self.candidates_per_round,
            "explore_ratio_init": self.explore_ratio_init,
            "workers": self.workers,
            "rng_seed": self.rng_seed,
            "high_explore_enabled": self.high_explore_enabled,
            "region_memory_enabled": self.region_memory_enabled,
        }


@dataclass(frozen=True)
class Seed:
    position: tuple
    look_at: tuple
    focal_hint: float = 35.0
    aspect_hint: Optional[float] = None
    origin: str = "anchor"

    def to_dict(self) -> dict:
        return {"position": [float(v) for v in self.position],
                "look_at": [float(v) for v in self.look_at],
                "focal_hint": self.focal_hint,
                "aspect_hint": self.aspect_hint,
                "origin": self.origin}


@dataclass
class Incumbent:
    camera: CameraState
    internal_score: float
    signals: tuple          # (m1, m2, m3, m4, m5, m6)
    preview: Optional[RenderResult] = None
    subject_box_coverage: float = 0.0
    subject_box_aspect: float = 1.0

    def to_dict(self) -> dict:
        return {"camera": self.camera.to_dict(),
                "internal_score": self.internal_score,
                "signals": list(self.signals)}


@dataclass
class FinalResult:
    mission_id: str
    camera: CameraState
    ratio: float
    internal_score: float
    log: dict
    final_render: Optional[RenderResult] = None
    final_image_path: Optional[str] = None


def internal_score(m1, m2, m3, m4, m5, m6) -> float:
    """Fixed weighted sum of the six reviewer signals; weights are not config."""
    values = (m1, m2, m3, m4, m5, m6)
    for v in values:
        if not 0.0 <= float(v) <= 1.0:
            raise ValueError(f"reviewer signal {v} outside [0, 1]")
    return float(sum(w * float(v) for w, v in zip(INTERNAL_WEIGHTS, values)))


def high_explore_priority(anchor: Anchor, incumbent_pos, memory: RegionMemory,
                          h: float) -> Optional[float]:
    """Priority of an anchor for the forced high-explore lane; None when its
    region is dead (skipped before ranking)."""
    label = memory.label(anchor.region_key)
    if label == DEAD:
        return None
    bonus = UNKNOWN_BONUS if label == UNKNOWN else KNOWN_BONUS
    dist = float(np.linalg.norm(np.asarray(anchor.position) - np.asarray(incumbent_pos)))
    score = anchor.prior + bonus + min(dist / (2.0 * h), DISTANCE_CAP)
    score -= VISIT_PENALTY * memory.visits(anchor.region_key)
    if label == PROMISING:
        score -= PROMISING_PENALTY
    return score


def _pick_high_explore(bank, incumbent_pos, memory, h) -> Optional[Anchor]:
    best = None
    best_score = None
    for anchor in bank:  # stable bank order breaks ties
        score = high_explore_priority(anchor, incumbent_pos, memory, h)
        if score is None:
            continue
        if best_score is None or score > best_score:
            best, best_score = anchor, score
    return best


def _seed_from_anchor(anchor: Anchor, origin: str, aspect_hint=None) -> Seed:
    return Seed(position=anchor.position, look_at=anchor.look_at,
                focal_hint=anchor.focal_hint,
                aspect_hint=aspect_hint if aspect_hint is not None else anchor.aspect_hint,
                origin=origin)


def _different_aspect(aspect_set, current: Optional[float]) -> Optional[float]:
    if len(aspect_set) < 2 or current is None:
        return None
    for a in aspect_set:
        if abs(a - current) > 1e-9:
            return a
    return None


def _inside_any(position, zones) -> bool:
    return any(z.contains(position) for z in zones)


def build_seed_pool(incumbent: Optional[Incumbent], memory: RegionMemory, bank,
                    feedback: Optional[RoundFeedback], config: SearchConfig,
                    round_index: int, blueprint: Blueprint, aspect_set,
                    rng: np.random.Generator, h: float, forbidden_zones=(),
                    scene: Optional[SceneModel] = None) -> tuple:
    """Exactly K seed slots with lane assignment.

    Returns (seeds, fallback_used, high_explore_reference_position).
    """
    k = config.candidates_per_round
    step_scale = feedback.step_scale if feedback is not None else 1.0
    explore_ratio = (feedback.explore_ratio_next if feedback is not None
                     else config.explore_ratio_init)
    look = np.asarray(blueprint.look_toward, dtype=float)
    reference = incumbent.camera.p if incumbent is not None else (
        scene.centroid if scene is not None else look)

    seeds = []
    used_regions = set()

    def admit(seed: Seed) -> bool:
        if _inside_any(seed.position, forbidden_zones):
            return False
        seeds.append(seed)
        used_regions.add(region_key(seed.position, h))
        return True

    # forced high-explore lane takes the last slot
    high_slots = 0
    high_seed = None
    if config.high_explore_enabled:
        anchor = _pick_high_explore(bank, reference, memory, h)
        if anchor is not None and not _inside_any(anchor.position, forbidden_zones):
            aspect = _different_aspect(
                aspect_set, incumbent.camera.r if incumbent is not None else anchor.aspect_hint)
            high_seed = _seed_from_anchor(anchor, "high_explore", aspect_hint=aspect)
            high_slots = 1
            used_regions.add(anchor.region_key)

    remaining = k - high_slots

    def anchor_candidates():
        live = [a for a in bank if memory.label(a.region_key) != DEAD
                and not _inside_any(a.position, forbidden_zones)]
        # visit-ordered so explore slots rotate instead of re-picking one anchor
        return sorted(live, key=lambda a: (memory.visits(a.region_key), -a.prior,
                                           a.region_key))

    if incumbent is None:
        # cold start: all remaining slots from the bank by prior
        for anchor in bank:
            if len(seeds) >= remaining:
                break
            if anchor.region_key in used_regions:
                continue
            if _inside_any(anchor.position, forbidden_zones):
                continue
            admit(_seed_from_anchor(anchor, "anchor"))
        # bank smaller than K: reuse anchors with jitter targets
        idx = 0
        while len(seeds) < remaining and bank:
            anchor = bank[idx % len(bank)]
            if not _inside_any(anchor.position, forbidden_zones):
                seeds.append(_seed_from_anchor(anchor, "anchor"))
            idx += 1
            if idx > 4 * max(len(bank), 1):
                break
    else:
        explore_slots = int(round(explore_ratio * remaining))
        exploit_slots = remaining - explore_slots

        # exploit: incumbent refinements plus promising-region centers
        promising = [key for key in memory.promising_keys()
                     if not _inside_any(memory.cell_center(key), forbidden_zones)]
        placed = 0
        attempts = 0
        while placed < exploit_slots and attempts < 50 * (exploit_slots + 1):
            attempts += 1
            if placed == 1 and promising:
                key = promising[placed % len(promising)]
                center = memory.cell_center(key)
                if admit(Seed(position=tuple(float(v) for v in center),
                              look_at=tuple(float(v) for v in look),
                              focal_hint=incumbent.camera.f, origin="region")):
                    placed += 1
                    continue
                promising = promising[1:]
                continue
            pos = incumbent.camera.p + rng.normal(0.0, 0.25 * h * step_scale, 3)
            tgt = incumbent.camera.l + rng.normal(0.0, 0.1 * h, 3)
            # lens jitter lets refinement tune subject scale, not just framing
            focal = float(np.clip(incumbent.camera.f * np.exp(rng.normal(0.0, 0.25)),
                                  8.0, 400.0))
            seed = Seed(position=tuple(float(v) for v in pos),
                        look_at=tuple(float(v) for v in tgt),
                        focal_hint=focal,
                        aspect_hint=incumbent.camera.r, origin="incumbent")
            if _inside_any(seed.position, forbidden_zones):
                continue  # resample; rng advances so this terminates in practice
            seeds.append(seed)
            placed += 1

        # explore: low-visit anchors, then geometry probes
        anchors_left = [a for a in anchor_candidates() if a.region_key not in used_regions]
        placed = 0
        for anchor in anchors_left:
            if placed >= explore_slots:
                break
            if admit(_seed_from_anchor(anchor, "anchor")):
                placed += 1
        probe_radius = 0.9 * float(np.linalg.norm(incumbent.camera.p - look))
        probe_radius = max(probe_radius, h)
        attempts = 0
        while placed < explore_slots and attempts < 50 * (explore_slots - placed + 1):
            attempts += 1
            direction = rng.normal(size=3)
            norm = float(np.linalg.norm(direction))
            if norm < 1e-9:
                continue
            pos = look + direction / norm * probe_radius
            seed = Seed(position=tuple(float(v) for v in pos),
                        look_at=tuple(float(v) for v in look),
                        focal_hint=incumbent.camera.f, origin="probe")
            if _inside_any(seed.position, forbidden_zones):
                continue
            seeds.append(seed)
            placed += 1

    if high_seed is not None:
        seeds.append(high_seed)

    fallback_used = False
    if not seeds:
        # every candidate position forbidden: take the top-prior anchor regardless
        fallback_used = True
        top = bank[0]
        seeds = [_seed_from_anchor(top, "fallback")]
    while len(seeds) < k:
        seeds.append(replace(seeds[0]))

    return tuple(seeds[:k]), fallback_used, tuple(float(v) for v in np.asarray(reference))


def _candidate_record(proposal: CandidateProposal, signals, score, hard_failure,
                      key, failure=None) -> dict:
    return {
        "camera": proposal.camera.to_dict(),
        "seed_origin": proposal.seed_origin,
        "rationale": proposal.rationale,
        "signals": list(signals) if signals is not None else None,
        "internal_score": score,
        "hard_failure": hard_failure,
        "region_key": list(key) if key is not None else None,
        "render_failure": failure,
    }


@dataclass
class SearchState:
    mission: MissionSpec
    scene: SceneModel
    blueprint: Blueprint
    topo: TopologySummary
    bank: list
    memory: RegionMemory
    config: SearchConfig
    rng: np.random.Generator
    client: object
    h: float
    render_fn: object = render
    incumbent: Optional[Incumbent] = None
    feedback: Optional[RoundFeedback] = None
    reviewer_zones: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    preview_count: int = 0
    fallback_events: list = field(default_factory=list)

    @property
    def preview_budget(self) -> int:
        return self.config.rounds * self.config.candidates_per_round

    def active_forbidden_zones(self) -> list:
        return self.memory.forbidden_zones(self.reviewer_zones)


def _score_candidate(state: SearchState, proposal: CandidateProposal,
                     preview: RenderResult) -> tuple:
    """(signals, J, hard_failure, subject screen box) for a rendered candidate."""
    cam = proposal.camera
    scene = state.scene
    spec = state.mission.eval_spec
    subject = None
    subject_id = state.blueprint.primary_subject or spec.primary_subject
    if subject_id is not None and scene.has_object(subject_id):
        subject = scene.object_by_id(subject_id)

    placement = spec.placement_pref if spec.placement_pref in ("left", "right", "top", "bottom") else None
    composition = spec.placement_pref if (spec.placement_pref or "").startswith("thirds") else None
    rules = rule_signals(cam, scene, subject, placement_pref=placement,
                         composition_pref=composition, eval_spec=spec)
    review = advisors.review_image(state.client, cam, preview, state.mission)
    signals = (float(rules.m1), rules.m2, review.m3, review.m4, review.m5, review.m6)
    score = internal_score(*signals)
    box = project_box(cam, subject) if subject is not None else None
    return signals, score, rules.hard_failure, box


def run_round(state: SearchState, round_index: int) -> dict:
    """One Director-Reviewer-Reflector round; appends and returns its RoundRecord."""
    config = state.config
    k = config.candidates_per_round
    forbidden = state.active_forbidden_zones()

    seeds, seed_fallback, reference = build_seed_pool(
        state.incumbent, state.memory, state.bank, state.feedback, config,
        round_index, state.blueprint, state.mission.aspect_set, state.rng,
        state.h, forbidden, scene=state.scene)
    if seed_fallback:
        state.fallback_events.append({"round": round_index, "event": "all_seeds_forbidden"})

    proposals = advisors.propose(
        state.client, seeds, state.blueprint, state.feedback, k,
        state.mission.aspect_set, state.rng, state.h, forbidden)

    # render previews under the global budget, one retry per failed request
    results = [None] * len(proposals)
    pending = []
    for i, prop in enumerate(proposals):
        if state.preview_count >= state.preview_budget:
            results[i] = RenderError("no_preview_slot", "preview budget exhausted")
            continue
        pending.append(i)
        state.preview_count += 1
    batch = render_parallel(state.scene,
                            [RenderRequest(camera=proposals[i].camera) for i in pending],
                            workers=config.workers, render_fn=state.render_fn)
    for slot, res in zip(pending, batch):
        results[slot] = res
    for i in list(pending):
        if isinstance(results[i], RenderError) and state.preview_count < state.preview_budget:
            state.preview_count += 1
            retry = render_parallel(state.scene, [RenderRequest(camera=proposals[i].camera)],
                                    workers=1, render_fn=state.render_fn)[0]
            if not isinstance(retry, RenderError):
                results[i] = retry

    incumbent_before = state.incumbent
    before_score = incumbent_before.internal_score if incumbent_before is not None else 0.0

    candidates = []
    scored = []
    for proposal, result in zip(proposals, results):
        key = state.memory.key_for(proposal.camera.p)
        if isinstance(result, RenderError):
            candidates.append(_candidate_record(proposal, None, None, None, key,
                                                failure=result.category))
            continue
        signals, score, hard_failure, box = _score_candidate(state, proposal, result)
        candidates.append(_candidate_record(proposal, signals, score, hard_failure, key))
        scored.append((score, len(scored), proposal, result, signals, hard_failure, box))

    pairwise_verdict = None
    if scored:
        best = max(scored, key=lambda t: (t[0], -t[1]))
        score, _, proposal, result, signals, hard_failure, box = best
        challenger = Incumbent(
            camera=proposal.camera, internal_score=score, signals=signals,
            preview=result,
            subject_box_coverage=box.coverage if box is not None else 0.0,
            subject_box_aspect=_box_aspect(box))
        if incumbent_before is None:
            state.incumbent = challenger
            pairwise_verdict = "adopted_first_incumbent"
        else:
            verdict = advisors.compare_pairwise(
                state.client,
                {"internal_score": incumbent_before.internal_score,
                 "signals": list(incumbent_before.signals)},
                {"internal_score": score, "signals": list(signals)})
            pairwise_verdict = verdict
            if verdict == "take_challenger":
                state.incumbent = challenger

    # reflection over this round's records
    reflect_records = []
    for cand in candidates:
        reflect_records.append({
            "internal_score": cand["internal_score"] or 0.0,
            "hard_failure": cand["hard_failure"] or cand["render_failure"],
            "improved": (cand["internal_score"] or 0.0) > before_score,
        })
    feedback = advisors.reflect_round(state.client, reflect_records, state.mission.aspect_set)
    state.feedback = feedback
    for zone in feedback.forbidden_zones:
        state.reviewer_zones.append(zone)

    # memory update: every rendered candidate contributes
    for cand in candidates:
        if cand["internal_score"] is None:
            continue
        semantic = cand["signals"][5]
        state.memory.record_candidate(
            position=np.asarray(cand["camera"]["p"], dtype=float),
            internal_score=cand["internal_score"], semantic=semantic,
            round_delta=cand["internal_score"] - before_score,
            hard_failed=cand["hard_failure"] is not None)

    record = {
        "round_index": round_index,
        "high_explore_reference": list(reference),
        "seeds": [s.to_dict() for s in seeds],
        "candidates": candidates,
        "incumbent_before": incumbent_before.to_dict() if incumbent_before else None,
        "incumbent_after": state.incumbent.to_dict() if state.incumbent else None,
        "pairwise_verdict": pairwise_verdict,
        "feedback": feedback.to_dict(),
        "forbidden_zones_active": [z.to_dict() for z in forbidden],
        "memory_snapshot": state.memory.snapshot(),
    }
    state.rounds.append(record)
    return record


def _box_aspect(box) -> float:
    if box is None:
        return 1.0
    w = box.u_max - box.u_min
    h = box.v_max - box.v_min
    return w / h if h > 1e-9 else 1.0


def select_final_ratio(aspect_set, scene: SceneModel, topo: TopologySummary,
                       incumbent: Incumbent) -> float:
    """Rule-based aspect-ratio decision from the best preview's screen statistics."""
    aspects = sorted(set(aspect_set))
    if len(aspects) == 1:
        return aspects[0]
    extent = scene.scene_aabb_max - scene.scene_aabb_min
    horizontal = float(max(extent[0], extent[1]))
    vertical = float(extent[2])
    coverage = incumbent.subject_box_coverage

    if horizontal > 2.0 * max(vertical, 1e-9) and coverage < 0.2:
        return aspects[-1]  # widest
    if coverage >= 0.2 and 0.75 <= incumbent.subject_box_aspect <= 4.0 / 3.0:
        return min(aspects, key=lambda a: (abs(a - 1.0), a))  # squarest
    if topo.vertical_structure == "tower":
        return aspects[0]  # tallest
    return incumbent.camera.r


def run_search(mission: MissionSpec, scene: SceneModel, config: SearchConfig,
               client=None, out_dir=None, render_fn=render) -> FinalResult:
    """Full budgeted search: exactly `rounds` rounds, final ratio selection,
    final-quality render, and a complete audit log."""
    topo = topology_summary(scene)
    if client is None or isinstance(client, StubAdvisorClient):
        blueprint = build_blueprint_rule_based(mission, scene, topo)
    else:
        blueprint = build_blueprint_advised(mission, scene, topo, client)
    h = cell_size(scene.scene_scale)
    if client is None:
        client = StubAdvisorClient(scene, blueprint, mission,
                                   rng_seed=config.rng_seed, h=h)
    bank = build_anchor_bank(scene, blueprint, topo)
    memory_cls = RegionMemory if config.region_memory_enabled else NullRegionMemory
    state = SearchState(
        mission=mission, scene=scene, blueprint=blueprint, topo=topo, bank=bank,
        memory=memory_cls(h), config=config,
        rng=np.random.default_rng(config.rng_seed), client=client, h=h,
        render_fn=render_fn)

    for round_index in range(1, config.rounds + 1):
        run_round(state, round_index)

    if state.incumbent is None:
        raise SearchAbort("no_first_image")

    ratio = select_final_ratio(mission.aspect_set, scene, topo, state.incumbent)
    final_camera = state.incumbent.camera.with_aspect(ratio)
    final_result = render_fn(scene, RenderRequest(camera=final_camera, quality="final"))

    round_keys = [[tuple(c["region_key"]) for c in rec["candidates"]
                   if c["region_key"] is not None and c["internal_score"] is not None]
                  for rec in state.rounds]
    from .regions import search_diagnostics
    try:
        coverage, collapse, revisit = search_diagnostics(round_keys)
    except ValueError:
        coverage = collapse = revisit = None

    final_image_path = None
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
        final_image_path = os.path.join(out_dir, f"{mission.mission_id}_final.png")
        final_result.save(final_image_path)

    from .blueprint import mission_to_dict
    log = {
        "mission_id": mission.mission_id,
        "scene_ref": mission.scene_ref,
        "category": mission.category,
        "mission": mission_to_dict(mission),
        "config": config.to_dict(),
        "blueprint": blueprint.to_dict(),
        "topology": topology_to_dict(topo),
        "anchor_bank": [a.to_dict() for a in bank],
        "rounds": state.rounds,
        "fallback_events": state.fallback_events,
        "diagnostics": {"coverage": coverage, "collapse": collapse, "revisit": revisit,
                        "preview_renders": state.preview_count,
                        "preview_budget": state.preview_budget,
                        "final_samples": final_result.stats.get("samples")},
        "final": {
            "camera": final_camera.to_dict(),
            "ratio": ratio,
            "internal_score": state.incumbent.internal_score,
            "signals": list(state.incumbent.signals),
            "image": f"{mission.mission_id}_final.png",
        },
    }
    if out_dir is not None:
        import os
        log_path = os.path.join(out_dir, f"{mission.mission_id}_run.json")
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write(serialize_log(log))

    return FinalResult(mission_id=mission.mission_id, camera=final_camera, ratio=ratio,
                       internal_score=state.incumbent.internal_score, log=log,
                       final_render=final_result, final_image_path=final_image_path)


def serialize_log(log: dict) -> str:
    """Canonical byte-stable serialization of the audit log."""
    return json.dumps(log, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
