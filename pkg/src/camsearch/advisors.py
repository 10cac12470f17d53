"""Pluggable advisor roles: proposer, visual reviewer, round reflector.

Every value leaving this module satisfies its declared clamp, no matter how
malformed the underlying client's output is. The scripted stub client is
bit-deterministic given a run seed and computes its visual scores from
projection geometry, so closed-loop tests have real signal to optimize.
"""

from __future__ import annotations

import json
import logging
import urllib.request
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blueprint import SCALE_BANDS, Blueprint, MissionSpec
from .camera import (CameraState, camera_angle_category, project_box,
                     project_point, rule_m1, rule_m2)
from .regions import ForbiddenZone
from .scene import SceneModel

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

STEP_SCALE_RANGE = (0.4, 1.8)
EXPLORE_RATIO_RANGE = (0.1, 0.8)
MAX_FAILURE_TAGS = 6
MAX_REVIEWER_ZONES = 2
MAX_RATIONALE_CHARS = 500

SEED_ORIGINS = ("incumbent", "region", "anchor", "probe", "high_explore", "fallback")
PREFERRED_MOTIONS = ("orbit", "dolly", "crane", "truck", "hold")


@dataclass(frozen=True)
class CandidateProposal:
    camera: CameraState
    rationale: str
    seed_origin: str

    def to_dict(self) -> dict:
        return {"camera": self.camera.to_dict(), "rationale": self.rationale,
                "seed_origin": self.seed_origin}


@dataclass(frozen=True)
class VisualReview:
    m3: float
    m4: float
    m5: float
    m6: float
    reasoning: str = ""
    summary: str = ""
    fallback_used: bool = False

    def to_dict(self) -> dict:
        return {"m3": self.m3, "m4": self.m4, "m5": self.m5, "m6": self.m6,
                "reasoning": self.reasoning, "summary": self.summary,
                "fallback_used": self.fallback_used}


NEUTRAL_REVIEW = VisualReview(0.5, 0.5, 0.5, 0.5, reasoning="fallback",
                              summary="advisor output unusable", fallback_used=True)


@dataclass(frozen=True)
class RoundFeedback:
    round_review: str = ""
    next_strategy: str = ""
    step_scale: float = 1.0
    explore_ratio_next: float = 0.35
    preferred_motion: str = "hold"
    failure_tags: tuple = ()
    forbidden_zones: tuple = ()
    seed_candidates: tuple = ()

    def to_dict(self) -> dict:
        return {
            "round_review": self.round_review,
            "next_strategy": self.next_strategy,
            "step_scale": self.step_scale,
            "explore_ratio_next": self.explore_ratio_next,
            "preferred_motion": self.preferred_motion,
            "failure_tags": list(self.failure_tags),
            "forbidden_zones": [z.to_dict() for z in self.forbidden_zones],
            "seed_candidates": [c.to_dict() for c in self.seed_candidates],
        }


NEUTRAL_FEEDBACK = RoundFeedback()


def _clamp(value, lo, hi, default):
    try:
        v = float(value)
    except (TypeError, ValueError):
        return default
    if not np.isfinite(v):
        return default
    return min(max(v, lo), hi)


def _camera_from_raw(raw, aspect_set) -> Optional[CameraState]:
    """Normalize an advisor-supplied camera dict; None when unsalvageable."""
    if not isinstance(raw, dict):
        return None
    try:
        p = np.asarray(raw["p"], dtype=float)
        l = np.asarray(raw["l"], dtype=float)
        f = float(raw["f"])
        d = float(raw.get("d", 5.6))
        r = float(raw.get("r", aspect_set[0]))
    except (KeyError, TypeError, ValueError):
        return None
    if p.shape != (3,) or l.shape != (3,):
        return None
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(l)) and np.isfinite(f)
            and np.isfinite(d) and np.isfinite(r)):
        return None
    f = min(max(f, 8.0), 400.0)
    d = min(max(d, 0.95), 22.0)
    r = min(aspect_set, key=lambda a: abs(a - r))  # snap to the allowed set
    cam = CameraState(p=p, l=l, f=f, d=d, r=r)
    return cam if cam.is_valid(aspect_set) else None


def perturb_seed(seed, rng: np.random.Generator, h: float,
                 step_scale: float = 1.0, aspect_set=(1.5,)) -> CameraState:
    """Gaussian jitter around a seed: sigma 0.25*h*step_scale on position, 0.1*h on look-at."""
    pos = np.asarray(seed.position, dtype=float) + rng.normal(0.0, 0.25 * h * step_scale, 3)
    look = np.asarray(seed.look_at, dtype=float) + rng.normal(0.0, 0.1 * h, 3)
    if float(np.linalg.norm(pos - look)) < 1e-6:
        pos = pos + np.array([0.0, 0.0, 0.1 * h])
    aspect = getattr(seed, "aspect_hint", None)
    if aspect is None or not any(abs(aspect - a) < 1e-9 for a in aspect_set):
        aspect = aspect_set[0]
    return CameraState(p=pos, l=look, f=getattr(seed, "focal_hint", 35.0), d=5.6, r=aspect)


def _inside_any(position, zones) -> bool:
    return any(z.contains(position) for z in zones)


def propose(client, seed_pool, blueprint: Blueprint, last_feedback: Optional[RoundFeedback],
            k: int, aspect_set, rng: np.random.Generator, h: float,
            forbidden_zones=()) -> list:
    """Exactly k validated proposals; malformed advisor output is topped up with
    seed perturbations (origin 'fallback'). Proposals never land in forbidden zones."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not seed_pool:
        raise ValueError("seed pool must be non-empty")
    step_scale = last_feedback.step_scale if last_feedback is not None else 1.0

    accepted = []
    try:
        raw_list = client.propose_raw(seed_pool, blueprint, last_feedback, k)
    except Exception as exc:
        log.warning("proposer failed (%s); falling back to seed perturbations", exc)
        raw_list = []
    if not isinstance(raw_list, list):
        raw_list = []
    for raw in raw_list[:k]:
        if not isinstance(raw, dict):
            continue
        cam = _camera_from_raw(raw.get("camera"), aspect_set)
        if cam is None or _inside_any(cam.p, forbidden_zones):
            continue
        origin = raw.get("seed_origin")
        if origin not in SEED_ORIGINS:
            origin = "fallback"
        rationale = raw.get("rationale", "")
        if not isinstance(rationale, str):
            rationale = ""
        accepted.append(CandidateProposal(camera=cam, rationale=rationale[:MAX_RATIONALE_CHARS],
                                          seed_origin=origin))

    # top up to k with perturbed seeds; retry out-of-zone, then use the bare seed
    i = 0
    while len(accepted) < k:
        seed = seed_pool[i % len(seed_pool)]
        cam = None
        for _ in range(20):
            cand = perturb_seed(seed, rng, h, step_scale, aspect_set)
            if cand.is_valid(aspect_set) and not _inside_any(cand.p, forbidden_zones):
                cam = cand
                break
        if cam is None:
            base = CameraState(p=np.asarray(seed.position, dtype=float),
                               l=np.asarray(seed.look_at, dtype=float),
                               f=getattr(seed, "focal_hint", 35.0), d=5.6,
                               r=aspect_set[0])
            cam = base if base.is_valid(aspect_set) else perturb_seed(seed, rng, h, 0.1, aspect_set)
        accepted.append(CandidateProposal(camera=cam, rationale="seed fallback",
                                          seed_origin="fallback"))
        i += 1
    return accepted[:k]


def review_image(client, camera: CameraState, rendered_preview,
                 mission: MissionSpec) -> VisualReview:
    """Four clamped visual scores; any parse failure yields the neutral 0.5 review."""
    try:
        raw = client.review_raw(camera, rendered_preview, mission)
    except Exception as exc:
        log.warning("reviewer failed (%s); using neutral fallback", exc)
        return NEUTRAL_REVIEW
    if not isinstance(raw, dict):
        return NEUTRAL_REVIEW
    scores = []
    for name in ("m3", "m4", "m5", "m6"):
        value = _clamp(raw.get(name), 0.0, 1.0, None)
        if value is None:
            return NEUTRAL_REVIEW
        scores.append(value)
    reasoning = raw.get("reasoning", "")
    summary = raw.get("summary", "")
    return VisualReview(
        m3=scores[0], m4=scores[1], m5=scores[2], m6=scores[3],
        reasoning=reasoning if isinstance(reasoning, str) else "",
        summary=summary if isinstance(summary, str) else "",
        fallback_used=False,
    )


def _zone_from_raw(raw) -> Optional[ForbiddenZone]:
    if not isinstance(raw, dict):
        return None
    try:
        center = tuple(float(v) for v in raw["center"])
        half = tuple(float(v) for v in raw["half_extent"])
    except (KeyError, TypeError, ValueError):
        return None
    if len(center) != 3 or len(half) != 3:
        return None
    if not all(np.isfinite(center)) or not all(np.isfinite(half)):
        return None
    if any(v <= 0 for v in half):
        return None
    return ForbiddenZone(center=center, half_extent=half, origin="reviewer")


def reflect_round(client, round_records, aspect_set) -> RoundFeedback:
    """Clamped round feedback; parse failure yields the neutral feedback."""
    try:
        raw = client.reflect_raw(round_records)
    except Exception as exc:
        log.warning("reflector failed (%s); using neutral feedback", exc)
        return NEUTRAL_FEEDBACK
    if not isinstance(raw, dict):
        return NEUTRAL_FEEDBACK

    tags = raw.get("failure_tags", [])
    if not isinstance(tags, (list, tuple)):
        tags = []
    tags = tuple(str(t)[:80] for t in tags if isinstance(t, str))[:MAX_FAILURE_TAGS]

    zones = []
    raw_zones = raw.get("forbidden_zones", [])
    if isinstance(raw_zones, (list, tuple)):
        for rz in raw_zones:
            zone = _zone_from_raw(rz)
            if zone is not None:
                zones.append(zone)
            if len(zones) >= MAX_REVIEWER_ZONES:
                break

    seeds = []
    raw_seeds = raw.get("seed_candidates", [])
    if isinstance(raw_seeds, (list, tuple)):
        for rs in raw_seeds:
            cam = _camera_from_raw(rs.get("camera") if isinstance(rs, dict) else rs, aspect_set)
            if cam is not None:
                seeds.append(CandidateProposal(camera=cam, rationale="reflector seed",
                                               seed_origin="region"))

    motion = raw.get("preferred_motion")
    if motion not in PREFERRED_MOTIONS:
        motion = "hold"
    review = raw.get("round_review", "")
    strategy = raw.get("next_strategy", "")
    return RoundFeedback(
        round_review=review if isinstance(review, str) else "",
        next_strategy=strategy if isinstance(strategy, str) else "",
        step_scale=_clamp(raw.get("step_scale"), *STEP_SCALE_RANGE, default=1.0),
        explore_ratio_next=_clamp(raw.get("explore_ratio_next"), *EXPLORE_RATIO_RANGE,
                                  default=0.35),
        preferred_motion=motion,
        failure_tags=tags,
        forbidden_zones=tuple(zones),
        seed_candidates=tuple(seeds),
    )


def compare_pairwise(client, incumbent_record, challenger_record) -> str:
    """'keep_incumbent' or 'take_challenger'; any parse failure keeps the incumbent."""
    try:
        raw = client.pairwise_raw(incumbent_record, challenger_record)
    except Exception as exc:
        log.warning("pairwise comparison failed (%s); keeping incumbent", exc)
        return "keep_incumbent"
    if isinstance(raw, dict) and raw.get("verdict") == "take_challenger":
        return "take_challenger"
    return "keep_incumbent"


# ---------------------------------------------------------------------------
# deterministic scripted stub client


def _triangle_band(value: float, band: tuple) -> float:
    """1.0 inside the band, linear ramps to 0 at zero and at 3x the band top."""
    lo, hi = band
    if value <= 0:
        return 0.0
    if value < lo:
        return value / lo
    if value <= hi:
        return 1.0
    tail = 3.0 * hi
    if value >= tail:
        return 0.0
    return (tail - value) / (tail - hi)


def stub_visual_scores(camera: CameraState, scene: SceneModel, blueprint: Blueprint,
                       mission: Optional[MissionSpec] = None) -> tuple:
    """Geometry-driven proxies for the four visual dimensions.

    m3: target-point composition, m4: subject clipping, m5: subject scale fit,
    m6: blueprint alignment (in-frame + scale band + angle preference).
    """
    if not camera.is_valid():
        return (0.0, 0.0, 0.0, 0.0)
    subject = None
    if blueprint.primary_subject is not None and scene.has_object(blueprint.primary_subject):
        subject = scene.object_by_id(blueprint.primary_subject)
    band = SCALE_BANDS.get(blueprint.scale_pref or "medium", SCALE_BANDS["medium"])
    placement = mission.eval_spec.placement_pref if mission is not None else None

    angle = camera_angle_category(camera)
    if angle == blueprint.angle_pref:
        angle_match = 1.0
    else:
        order = ("low", "eye", "high", "top")
        gap = abs(order.index(angle) - order.index(blueprint.angle_pref))
        angle_match = 0.5 if gap == 1 else 0.0

    if subject is None:
        # no hero subject: score how much of the scene is readable in frame
        proj = project_point(camera, scene.centroid)
        if proj is None or not (0 <= proj[0] <= 1 and 0 <= proj[1] <= 1):
            return (0.0, 0.0, 0.0, angle_match * 0.5)
        dist = float(np.hypot(proj[0] - 0.5, proj[1] - 0.5))
        m3 = max(0.0, 1.0 - dist / 0.45)
        in_frame = 0
        for obj in scene.objects:
            p = project_point(camera, obj.center)
            if p is not None and 0 <= p[0] <= 1 and 0 <= p[1] <= 1:
                in_frame += 1
        m4 = in_frame / len(scene.objects)
        total = min(1.0, sum(project_box(camera, o).coverage for o in scene.objects))
        m5 = _triangle_band(total, (0.15, 0.7))
        m6 = (m4 + angle_match) / 2.0
        return (m3, m4, m5, m6)

    cue_target = placement if (placement or "").startswith("thirds") else None
    if "thirds" in blueprint.composition_cues and cue_target is None:
        cue_target = "thirds-left"
    m3 = rule_m2(camera, subject, cue_target)

    box = project_box(camera, subject)
    m4 = box.coverage / box.raw_area if box.raw_area > 1e-12 else 0.0
    m4 = min(1.0, m4)
    m5 = _triangle_band(box.coverage, band)
    m1 = rule_m1(camera, subject, placement if placement in ("left", "right", "top", "bottom") else None).m1
    m6 = (float(m1) + _triangle_band(box.coverage, band) + angle_match) / 3.0
    return (m3, m4, m5, m6)


class StubAdvisorClient:
    """Deterministic scripted advisor; all roles driven by projection geometry."""

    def __init__(self, scene: SceneModel, blueprint: Blueprint, mission: MissionSpec,
                 rng_seed: int = 0, h: float = 1.0):
        self.scene = scene
        self.blueprint = blueprint
        self.mission = mission
        self.h = h
        self.rng = np.random.default_rng(rng_seed)

    def build_blueprint(self, mission, scene, topo) -> dict:
        # the stub has no language model; defer entirely to the rule-based builder
        raise NotImplementedError("stub advisor does not parse instructions")

    def propose_raw(self, seed_pool, blueprint, last_feedback, k) -> list:
        step_scale = last_feedback.step_scale if last_feedback is not None else 1.0
        aspect_set = self.mission.aspect_set
        out = []
        for i in range(k):
            seed = seed_pool[i % len(seed_pool)]
            if i < len(seed_pool):
                cam = CameraState(
                    p=np.asarray(seed.position, dtype=float),
                    l=np.asarray(seed.look_at, dtype=float),
                    f=getattr(seed, "focal_hint", 35.0), d=5.6,
                    r=self._aspect_for(seed, aspect_set))
            else:
                cam = perturb_seed(seed, self.rng, self.h, step_scale, aspect_set)
            origin = getattr(seed, "origin", None) or getattr(seed, "source", None)
            if origin not in SEED_ORIGINS:
                origin = "anchor"
            out.append({"camera": cam.to_dict(),
                        "rationale": f"{origin} seed {i}",
                        "seed_origin": origin})
        return out

    @staticmethod
    def _aspect_for(seed, aspect_set) -> float:
        hint = getattr(seed, "aspect_hint", None)
        if hint is not None:
            return min(aspect_set, key=lambda a: abs(a - hint))
        return aspect_set[0]

    def review_raw(self, camera, rendered_preview, mission) -> dict:
        m3, m4, m5, m6 = stub_visual_scores(camera, self.scene, self.blueprint, self.mission)
        return {"m3": m3, "m4": m4, "m5": m5, "m6": m6,
                "reasoning": "projection-driven stub review",
                "summary": f"scores {m3:.2f}/{m4:.2f}/{m5:.2f}/{m6:.2f}"}

    def reflect_raw(self, round_records) -> dict:
        scores = [rec.get("internal_score", 0.0) for rec in round_records]
        best = max(scores) if scores else 0.0
        tags = []
        for rec in round_records:
            tag = rec.get("hard_failure")
            if tag and tag not in tags:
                tags.append(tag)
        improved = bool(round_records) and round_records[-1].get("improved", False)
        # shrink steps once candidates score well; widen exploration when stuck
        step_scale = 0.7 if best >= 0.65 else (1.0 if improved else 1.3)
        explore = 0.25 if best >= 0.65 else (0.35 if improved else 0.55)
        return {
            "round_review": f"best internal score {best:.3f}",
            "next_strategy": "refine" if best >= 0.65 else "explore",
            "step_scale": step_scale,
            "explore_ratio_next": explore,
            "preferred_motion": "orbit" if best < 0.5 else "dolly",
            "failure_tags": tags,
            "forbidden_zones": [],
        }

    def pairwise_raw(self, incumbent_record, challenger_record) -> dict:
        inc = incumbent_record.get("internal_score", 0.0)
        cha = challenger_record.get("internal_score", 0.0)
        # strict margin: equal scores keep the incumbent
        verdict = "take_challenger" if cha > inc + 0.02 else "keep_incumbent"
        return {"verdict": verdict, "margin": cha - inc}


class RemoteAdvisorClient:
    """HTTP advisor speaking the fixed wire schema: {role, payload, schema_version}."""

    def __init__(self, url: str, timeout: float = 60.0, retries: int = 1):
        self.url = url
        self.timeout = timeout
        self.retries = retries

    def _call(self, role: str, payload: dict) -> dict:
        body = json.dumps({"role": role, "payload": payload,
                           "schema_version": SCHEMA_VERSION}).encode("utf-8")
        last_exc = None
        for _ in range(self.retries + 1):
            try:
                req = urllib.request.Request(
                    self.url, data=body, headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except Exception as exc:
                last_exc = exc
        raise RuntimeError(f"remote advisor unreachable: {last_exc}")

    def build_blueprint(self, mission, scene, topo) -> dict:
        from .scene import topology_to_dict
        return self._call("blueprint", {
            "instruction": mission.instruction,
            "topology": topology_to_dict(topo),
        })

    def propose_raw(self, seed_pool, blueprint, last_feedback, k) -> list:
        payload = {
            "k": k,
            "blueprint": blueprint.to_dict(),
            "seeds": [
                {"position": list(map(float, s.position)),
                 "look_at": list(map(float, s.look_at)),
                 "focal_hint": float(getattr(s, "focal_hint", 35.0)),
                 "origin": getattr(s, "origin", None) or getattr(s, "source", "anchor")}
                for s in seed_pool
            ],
            "last_feedback": last_feedback.to_dict() if last_feedback is not None else None,
        }
        result = self._call("propose", payload)
        return result.get("proposals", []) if isinstance(result, dict) else []

    def review_raw(self, camera, rendered_preview, mission) -> dict:
        import base64
        import io
        image_b64 = None
        if rendered_preview is not None and getattr(rendered_preview, "image", None) is not None:
            buf = io.BytesIO()
            rendered_preview.image.save(buf, format="PNG")
            image_b64 = base64.b64encode(buf.getvalue()).decode("ascii")
        return self._call("review", {
            "camera": camera.to_dict(),
            "instruction": mission.instruction,
            "image_png_b64": image_b64,
        })

    def reflect_raw(self, round_records) -> dict:
        return self._call("reflect", {"records": list(round_records)})

    def pairwise_raw(self, incumbent_record, challenger_record) -> dict:
        return self._call("pairwise", {"incumbent": incumbent_record,
                                       "challenger": challenger_record})
