"""Global anchor bank: coarse camera seeds built before local search.

Sources: bounding-box ring heuristics, blueprint look-toward targets,
subject-visibility maxima on a coarse shell, and advisor-supplied scout
relocations. Construction is deterministic given (scene, blueprint, topo).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .blueprint import Blueprint
from .camera import CameraState, occlusion_fraction, project_box
from .regions import cell_size, region_key
from .scene import SceneModel, TopologySummary

ANCHOR_SOURCES = ("bbox_heuristic", "look_toward", "visibility", "scout_relocation")

PRIOR_BASE = {
    "bbox_heuristic": 0.4,
    "look_toward": 0.6,
    "visibility": 0.7,
    "scout_relocation": 0.5,
}

# ring geometry; the numbers are config-exposed, not load-bearing
RING_RADIUS_FACTOR = 1.4
EYE_HEIGHT_FACTOR = 0.12
ELEVATED_HEIGHT_FACTOR = 0.65
DEFAULT_FOCAL = 35.0


@dataclass(frozen=True)
class Anchor:
    position: tuple
    look_at: tuple
    focal_hint: float
    prior: float
    source: str
    region_key: tuple
    aspect_hint: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "look_at": [float(v) for v in self.look_at],
            "focal_hint": self.focal_hint,
            "prior": self.prior,
            "source": self.source,
            "region_key": list(self.region_key),
            "aspect_hint": self.aspect_hint,
        }


def anchor_prior(anchor_source: str, subject_visibility_at_anchor: float) -> float:
    """Convex blend of the source base prior with scouted subject visibility."""
    if anchor_source not in PRIOR_BASE:
        raise ValueError(f"unknown anchor source {anchor_source!r}")
    if not 0.0 <= subject_visibility_at_anchor <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    return 0.5 * PRIOR_BASE[anchor_source] + 0.5 * subject_visibility_at_anchor


def _subject_visibility(scene: SceneModel, subject, position, focal=DEFAULT_FOCAL) -> float:
    """Unoccluded in-frame visibility of the subject from a scouting position."""
    if subject is None:
        return 0.5  # neutral when the mission has no primary subject
    cam = CameraState(p=position, l=subject.center, f=focal, d=5.6, r=1.5)
    if not cam.is_valid():
        return 0.0
    box = project_box(cam, subject)
    if box.coverage <= 0.0:
        return 0.0
    return 1.0 - occlusion_fraction(cam, scene, subject, samples=16)


def _free_position(scene: SceneModel, position: np.ndarray, h: float) -> np.ndarray:
    """Project a position trapped inside an object box to the nearest free cell center."""
    if not scene.point_inside_any(position):
        return position
    base = np.asarray(region_key(position, h), dtype=float)
    best = None
    best_dist = None
    for radius in range(1, 6):
        for di in range(-radius, radius + 1):
            for dj in range(-radius, radius + 1):
                for dk in range(-radius, radius + 1):
                    if max(abs(di), abs(dj), abs(dk)) != radius:
                        continue
                    center = (base + np.array([di, dj, dk]) + 0.5) * h
                    if scene.point_inside_any(center):
                        continue
                    dist = float(np.linalg.norm(center - position))
                    if best_dist is None or dist < best_dist:
                        best, best_dist = center, dist
        if best is not None:
            return best
    return position  # fully enclosed scene; keep the original


def build_anchor_bank(scene: SceneModel, blueprint: Blueprint,
                      topo: TopologySummary, scout_anchors=()) -> list:
    """Deterministic bank: 8 eye-height ring + 4 elevated ring + 1 top-down
    + up to 4 look-toward + up to 4 visibility anchors, deduplicated by cell."""
    h = cell_size(scene.scene_scale)
    centroid = scene.centroid
    half = (scene.scene_aabb_max - scene.scene_aabb_min) / 2.0
    horizontal_radius = float(np.hypot(half[0], half[1]))
    radius = RING_RADIUS_FACTOR * max(horizontal_radius, 0.5 * scene.scene_scale, 1.0)
    z0 = float(scene.scene_aabb_min[2])
    height = max(scene.scene_height, 1e-6)
    eye_z = z0 + EYE_HEIGHT_FACTOR * height
    elevated_z = z0 + (1.0 + ELEVATED_HEIGHT_FACTOR) * height

    subject = None
    if blueprint.primary_subject is not None and scene.has_object(blueprint.primary_subject):
        subject = scene.object_by_id(blueprint.primary_subject)

    raw = []

    def add(position, look_at, source, focal=DEFAULT_FOCAL, aspect_hint=None):
        pos = _free_position(scene, np.asarray(position, dtype=float), h)
        vis = _subject_visibility(scene, subject, pos)
        raw.append(Anchor(
            position=tuple(float(v) for v in pos),
            look_at=tuple(float(v) for v in look_at),
            focal_hint=focal,
            prior=anchor_prior(source, vis),
            source=source,
            region_key=region_key(pos, h),
            aspect_hint=aspect_hint,
        ))

    # 8 eye-height ring anchors at 45 degree steps
    for step in range(8):
        theta = step * np.pi / 4.0
        pos = centroid + np.array([radius * np.cos(theta), radius * np.sin(theta), 0.0])
        pos[2] = eye_z
        add(pos, centroid, "bbox_heuristic")

    # 4 elevated ring anchors at 90 degree steps, offset 45 degrees
    for step in range(4):
        theta = step * np.pi / 2.0 + np.pi / 4.0
        pos = centroid + np.array([radius * np.cos(theta), radius * np.sin(theta), 0.0])
        pos[2] = elevated_z
        add(pos, centroid, "bbox_heuristic")

    # 1 top-down
    top = centroid.copy()
    top[2] = float(scene.scene_aabb_max[2]) + 1.2 * scene.scene_scale
    add(top, centroid, "bbox_heuristic", focal=28.0)

    # up to 4 look-toward anchors from open regions
    look = np.asarray(blueprint.look_toward, dtype=float)
    open_regions = sorted(topo.open_regions,
                          key=lambda c: (-float(np.linalg.norm(np.asarray(c) - look)), c))
    for center in open_regions[:4]:
        pos = np.asarray(center, dtype=float)
        if float(np.linalg.norm(pos - look)) < 1e-6:
            continue
        add(pos, look, "look_toward")

    # up to 4 visibility anchors: shell positions maximizing unoccluded coverage
    if subject is not None:
        candidates = []
        for step in range(16):
            theta = step * np.pi / 8.0
            for zf in (0.25, 0.75):
                pos = centroid + np.array([
                    1.1 * radius * np.cos(theta), 1.1 * radius * np.sin(theta), 0.0])
                pos[2] = z0 + zf * height
                pos = _free_position(scene, pos, h)
                vis = _subject_visibility(scene, subject, pos)
                cam = CameraState(p=pos, l=subject.center, f=DEFAULT_FOCAL, d=5.6, r=1.5)
                cov = project_box(cam, subject).coverage if cam.is_valid() else 0.0
                candidates.append((vis * cov, step, zf, pos, vis))
        candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
        for score, _, _, pos, vis in candidates[:4]:
            if score <= 0:
                break
            add(pos, subject.center, "visibility")

    for scout in scout_anchors:
        raw.append(replace(scout, region_key=region_key(scout.position, h)))

    # deduplicate by region cell, keeping the highest-prior anchor per cell
    by_cell = {}
    for anchor in raw:
        kept = by_cell.get(anchor.region_key)
        if kept is None or anchor.prior > kept.prior:
            by_cell[anchor.region_key] = anchor
    bank = sorted(by_cell.values(), key=lambda a: (-a.prior, a.source, a.region_key))
    return bank
