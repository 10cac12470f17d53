"""Deterministic synthetic scenes and missions for desk-scale runs.

These stand in for authored scene assets: box layouts with a hero subject,
scattered context objects, occluding walls, and the occasional tower, plus
one mission per category. Everything derives from an integer seed.
"""

from __future__ import annotations

import numpy as np

from .blueprint import EvaluationSpec, MissionSpec
from .scene import SceneModel, SceneObject

ASPECT_CHOICES = ((16 / 9, 1.0), (1.5, 16 / 9), (16 / 9, 1.0, 1.5))


def make_scene(seed: int) -> SceneModel:
    rng = np.random.default_rng(seed)
    extent = float(rng.uniform(16.0, 28.0))
    half = extent / 2.0

    objects = [
        SceneObject(id="ground", label="ground plane",
                    aabb_min=(-half, -half, 0.0), aabb_max=(half, half, 0.4),
                    tags=frozenset({"background"})),
    ]

    subject_size = rng.uniform(1.5, 3.5, 3)
    subject_pos = rng.uniform(-0.3 * half, 0.3 * half, 2)
    objects.append(SceneObject(
        id="subject", label="hero structure",
        aabb_min=(subject_pos[0] - subject_size[0] / 2,
                  subject_pos[1] - subject_size[1] / 2, 0.4),
        aabb_max=(subject_pos[0] + subject_size[0] / 2,
                  subject_pos[1] + subject_size[1] / 2, 0.4 + subject_size[2]),
        tags=frozenset({"foreground", "dominant"})))

    n_scatter = int(rng.integers(3, 8))
    for i in range(n_scatter):
        size = rng.uniform(0.8, 2.5, 3)
        # keep scatter away from the subject so it stays photographable
        angle = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(0.35 * half, 0.8 * half)
        cx, cy = dist * np.cos(angle), dist * np.sin(angle)
        objects.append(SceneObject(
            id=f"prop_{i}", label="scatter prop",
            aabb_min=(cx - size[0] / 2, cy - size[1] / 2, 0.4),
            aabb_max=(cx + size[0] / 2, cy + size[1] / 2, 0.4 + size[2])))

    if rng.random() < 0.4:
        tx, ty = rng.uniform(-0.6 * half, 0.6 * half, 2)
        height = rng.uniform(0.6 * extent, 0.9 * extent)
        objects.append(SceneObject(
            id="tower", label="tall landmark",
            aabb_min=(tx - 1.0, ty - 1.0, 0.4), aabb_max=(tx + 1.0, ty + 1.0, 0.4 + height)))

    if rng.random() < 0.5:
        # partial wall near the subject creates real occlusion structure
        side = rng.choice([-1.0, 1.0])
        wx = subject_pos[0] + side * rng.uniform(3.0, 5.0)
        objects.append(SceneObject(
            id="wall", label="occluding wall",
            aabb_min=(wx - 0.4, subject_pos[1] - 4.0, 0.4),
            aabb_max=(wx + 0.4, subject_pos[1] + 4.0, 0.4 + rng.uniform(3.0, 6.0))))

    return SceneModel(objects=tuple(objects))


def make_mission(seed: int, scene_ref: str, category: str) -> MissionSpec:
    rng = np.random.default_rng(seed + 10_000)
    aspects = ASPECT_CHOICES[int(rng.integers(len(ASPECT_CHOICES)))]
    if category == "subject_placement":
        placement = str(rng.choice(["left", "right", "thirds-left", "thirds-right"]))
        spec = EvaluationSpec(primary_subject="subject", placement_pref=placement,
                              scale_pref=str(rng.choice(["medium", "large"])),
                              angle_pref="eye",
                              hard_fail_conditions=("subject_missing", "extreme_occlusion"))
        instruction = f"Photograph the hero structure placed {placement} of frame."
    elif category == "relational_composition":
        spec = EvaluationSpec(primary_subject="subject",
                              placement_pref="thirds-left",
                              scale_pref="medium", symmetry=bool(rng.random() < 0.5),
                              angle_pref=str(rng.choice(["eye", "high"])))
        instruction = "Frame the hero structure against its surroundings on a thirds line."
    else:  # atmosphere_style
        spec = EvaluationSpec(primary_subject=None,
                              angle_pref=str(rng.choice(["eye", "high"])),
                              depth_emphasis=True)
        instruction = "Capture a wide, moody establishing view of the whole set."
    return MissionSpec(
        mission_id=f"m{seed:04d}_{category}",
        scene_ref=scene_ref,
        instruction=instruction,
        aspect_set=tuple(aspects),
        eval_spec=spec,
        category=category,
    )


def make_suite(n_missions: int = 20, base_seed: int = 100) -> list:
    """Deterministic (mission, scene) pairs cycling through the three categories."""
    categories = ("subject_placement", "relational_composition", "atmosphere_style")
    suite = []
    for i in range(n_missions):
        seed = base_seed + i
        scene = make_scene(seed)
        mission = make_mission(seed, scene_ref=f"synthetic://{seed}",
                               category=categories[i % len(categories)])
        suite.append((mission, scene))
    return suite
