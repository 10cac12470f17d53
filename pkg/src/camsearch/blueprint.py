"""Mission specifications and the soft photographic blueprint.

The blueprint is a bag of preferences, never hard constraints: the search
must stay runnable with any single field removed. Two builders share one
interface: a deterministic rule-based one and an advisor-backed one that
falls back field-by-field to the rule-based values.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .scene import SceneModel, TopologySummary

log = logging.getLogger(__name__)

MISSION_FORMAT_VERSION = 1

MISSION_CATEGORIES = ("subject_placement", "relational_composition", "atmosphere_style")

COMPOSITION_CUES = ("thirds", "center", "leading_lines", "frame_within_frame")
ANGLE_PREFS = ("low", "eye", "high", "top")
ZONE_PREFS = ("ground", "elevated", "aerial", "interior")
PLACEMENT_PREFS = ("left", "right", "top", "bottom",
                   "thirds-left", "thirds-right", "thirds-top", "thirds-bottom",
                   "thirds-top-left", "thirds-top-right",
                   "thirds-bottom-left", "thirds-bottom-right")
SCALE_PREFS = ("small", "medium", "large")

# coverage bands for desired subject scale; config-exposed
SCALE_BANDS = {
    "small": (0.005, 0.05),
    "medium": (0.05, 0.20),
    "large": (0.20, 0.60),
}


class MissionError(ValueError):
    """Malformed mission document."""


@dataclass(frozen=True)
class EvaluationSpec:
    primary_subject: Optional[str] = None
    placement_pref: Optional[str] = None
    scale_pref: Optional[str] = None
    angle_pref: Optional[str] = None
    symmetry: Optional[bool] = None
    depth_emphasis: Optional[bool] = None
    hard_fail_conditions: tuple = ()


@dataclass(frozen=True)
class MissionSpec:
    mission_id: str
    scene_ref: str
    instruction: str
    aspect_set: tuple                 # floats, width/height
    eval_spec: EvaluationSpec
    category: str = "subject_placement"
    bootstrap: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aspect_set:
            raise MissionError(f"mission {self.mission_id!r}: empty aspect_set")
        if self.category not in MISSION_CATEGORIES:
            raise MissionError(f"mission {self.mission_id!r}: unknown category {self.category!r}")


@dataclass(frozen=True)
class Blueprint:
    primary_subject: Optional[str] = None
    context_objects: tuple = ()
    composition_cues: tuple = ()
    angle_pref: str = "eye"
    zone_pref: str = "ground"
    look_toward: tuple = (0.0, 0.0, 0.0)
    axis_pref: Optional[str] = None
    symmetry_pref: Optional[bool] = None
    scale_pref: Optional[str] = None
    vibe: str = ""
    negatives: tuple = ()

    def to_dict(self) -> dict:
        return {
            "primary_subject": self.primary_subject,
            "context_objects": list(self.context_objects),
            "composition_cues": list(self.composition_cues),
            "angle_pref": self.angle_pref,
            "zone_pref": self.zone_pref,
            "look_toward": [float(v) for v in self.look_toward],
            "axis_pref": self.axis_pref,
            "symmetry_pref": self.symmetry_pref,
            "scale_pref": self.scale_pref,
            "vibe": self.vibe,
            "negatives": list(self.negatives),
        }


def parse_aspect(value) -> float:
    """Accept numeric ratios or 'W:H' strings."""
    if isinstance(value, str):
        if ":" in value:
            w, h = value.split(":", 1)
            return float(w) / float(h)
        return float(value)
    return float(value)


def _eval_spec_from_dict(doc: dict, mission_id: str) -> EvaluationSpec:
    known = {"primary_subject", "placement_pref", "scale_pref", "angle_pref",
             "symmetry", "depth_emphasis", "hard_fail_conditions"}
    unknown = set(doc) - known
    if unknown:
        raise MissionError(f"mission {mission_id!r}: unknown eval_spec fields {sorted(unknown)}")
    return EvaluationSpec(
        primary_subject=doc.get("primary_subject"),
        placement_pref=doc.get("placement_pref"),
        scale_pref=doc.get("scale_pref"),
        angle_pref=doc.get("angle_pref"),
        symmetry=doc.get("symmetry"),
        depth_emphasis=doc.get("depth_emphasis"),
        hard_fail_conditions=tuple(doc.get("hard_fail_conditions", ())),
    )


def mission_from_dict(doc: dict) -> MissionSpec:
    for field_name in ("mission_id", "scene_ref", "instruction", "aspect_set", "eval_spec"):
        if field_name not in doc:
            raise MissionError(f"mission document missing field {field_name!r}")
    mission_id = doc["mission_id"]
    return MissionSpec(
        mission_id=mission_id,
        scene_ref=doc["scene_ref"],
        instruction=doc["instruction"],
        aspect_set=tuple(parse_aspect(a) for a in doc["aspect_set"]),
        eval_spec=_eval_spec_from_dict(doc["eval_spec"], mission_id),
        category=doc.get("category", "subject_placement"),
        bootstrap=doc.get("bootstrap", {}),
    )


def mission_to_dict(mission: MissionSpec) -> dict:
    spec = mission.eval_spec
    return {
        "format_version": MISSION_FORMAT_VERSION,
        "mission_id": mission.mission_id,
        "scene_ref": mission.scene_ref,
        "instruction": mission.instruction,
        "aspect_set": [float(a) for a in mission.aspect_set],
        "category": mission.category,
        "bootstrap": mission.bootstrap,
        "eval_spec": {
            "primary_subject": spec.primary_subject,
            "placement_pref": spec.placement_pref,
            "scale_pref": spec.scale_pref,
            "angle_pref": spec.angle_pref,
            "symmetry": spec.symmetry,
            "depth_emphasis": spec.depth_emphasis,
            "hard_fail_conditions": list(spec.hard_fail_conditions),
        },
    }


def load_mission(path) -> MissionSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return mission_from_dict(doc)


def save_mission(mission: MissionSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mission_to_dict(mission), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_mission_registry(path) -> list:
    """Registry document: {format_version, missions: [...]}, ids unique."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MISSION_FORMAT_VERSION:
        raise MissionError(f"{path}: unsupported format_version")
    missions = [mission_from_dict(m) for m in doc.get("missions", [])]
    ids = [m.mission_id for m in missions]
    if len(set(ids)) != len(ids):
        raise MissionError(f"{path}: duplicate mission ids")
    return missions


def save_mission_registry(missions, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"format_version": MISSION_FORMAT_VERSION,
             "missions": [mission_to_dict(m) for m in missions]},
            fh, indent=2, sort_keys=True)
        fh.write("\n")


def _placement_to_cue(placement_pref: Optional[str]) -> str:
    if placement_pref is not None and placement_pref.startswith("thirds"):
        return "thirds"
    return "center"


def build_blueprint_rule_based(mission: MissionSpec, scene: SceneModel,
                               topo: TopologySummary) -> Blueprint:
    """Deterministic blueprint from the evaluation spec and scouting summaries."""
    spec = mission.eval_spec
    subject = spec.primary_subject
    if subject is not None and not scene.has_object(subject):
        subject = None
    if subject is None and topo.dominant_objects:
        subject = topo.dominant_objects[0]

    if subject is not None:
        look_toward = tuple(float(v) for v in scene.object_by_id(subject).center)
    else:
        look_toward = tuple(float(v) for v in scene.centroid)

    context = tuple(oid for oid in topo.dominant_objects[:4] if oid != subject)
    angle = spec.angle_pref if spec.angle_pref in ANGLE_PREFS else "eye"
    zone = "aerial" if angle == "top" else ("elevated" if angle == "high" else "ground")

    return Blueprint(
        primary_subject=subject,
        context_objects=context,
        composition_cues=(_placement_to_cue(spec.placement_pref),),
        angle_pref=angle,
        zone_pref=zone,
        look_toward=look_toward,
        axis_pref=None,
        symmetry_pref=spec.symmetry,
        scale_pref=spec.scale_pref if spec.scale_pref in SCALE_PREFS else None,
        vibe=mission.instruction[:120],
        negatives=(),
    )


def _look_toward_in_bounds(look_toward, scene: SceneModel) -> bool:
    lt = np.asarray(look_toward, dtype=float)
    if lt.shape != (3,) or not np.all(np.isfinite(lt)):
        return False
    center = scene.centroid
    half = (scene.scene_aabb_max - scene.scene_aabb_min) / 2.0
    return bool(np.all(np.abs(lt - center) <= 2.0 * np.maximum(half, 1e-9)))


def build_blueprint_advised(mission: MissionSpec, scene: SceneModel,
                            topo: TopologySummary, advisor) -> Blueprint:
    """Advisor-backed builder with field-level fallback to the rule-based one."""
    fallback = build_blueprint_rule_based(mission, scene, topo)
    try:
        raw = advisor.build_blueprint(mission, scene, topo)
    except Exception as exc:
        log.warning("blueprint advisor failed (%s); using rule-based blueprint", exc)
        return fallback
    if not isinstance(raw, dict):
        log.warning("blueprint advisor returned non-mapping; using rule-based blueprint")
        return fallback

    bp = fallback
    subject = raw.get("primary_subject")
    if isinstance(subject, str) and scene.has_object(subject):
        bp = replace(bp, primary_subject=subject)
    context = raw.get("context_objects")
    if isinstance(context, (list, tuple)):
        valid = tuple(o for o in context if isinstance(o, str) and scene.has_object(o))
        if valid:
            bp = replace(bp, context_objects=valid)
    cues = raw.get("composition_cues")
    if isinstance(cues, (list, tuple)):
        valid = tuple(c for c in cues if c in COMPOSITION_CUES)
        if valid:
            bp = replace(bp, composition_cues=valid)
    if raw.get("angle_pref") in ANGLE_PREFS:
        bp = replace(bp, angle_pref=raw["angle_pref"])
    if raw.get("zone_pref") in ZONE_PREFS:
        bp = replace(bp, zone_pref=raw["zone_pref"])
    lt = raw.get("look_toward")
    if isinstance(lt, (list, tuple)) and _look_toward_in_bounds(lt, scene):
        bp = replace(bp, look_toward=tuple(float(v) for v in lt))
    if raw.get("axis_pref") in ("x", "y", "z"):
        bp = replace(bp, axis_pref=raw["axis_pref"])
    if isinstance(raw.get("symmetry_pref"), bool):
        bp = replace(bp, symmetry_pref=raw["symmetry_pref"])
    if raw.get("scale_pref") in SCALE_PREFS:
        bp = replace(bp, scale_pref=raw["scale_pref"])
    if isinstance(raw.get("vibe"), str):
        bp = replace(bp, vibe=raw["vibe"][:200])
    negatives = raw.get("negatives")
    if isinstance(negatives, (list, tuple)):
        bp = replace(bp, negatives=tuple(str(n)[:120] for n in negatives[:8]))
    return bp
