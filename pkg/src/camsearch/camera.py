"""Executable camera state, pinhole projection, and the two rule-side signals.

Conventions: 36 mm-wide reference sensor, zero roll (world +Z up), normalized
screen coordinates with origin at the top-left. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .scene import SceneModel, SceneObject

SENSOR_WIDTH_MM = 36.0
FOCAL_RANGE = (8.0, 400.0)
APERTURE_RANGE = (0.95, 22.0)
NEAR_PLANE = 1e-6

# artifact-defined thresholds, overridable per call
OCCLUSION_SAMPLES = 64
EXTREME_OCCLUSION_FRACTION = 0.9
SUBJECT_MISSING_COVERAGE = 0.0005


class InvalidCameraError(ValueError):
    """Camera position coincides with its look-at point."""


@dataclass(frozen=True)
class CameraState:
    p: np.ndarray          # position, world units
    l: np.ndarray          # look-at point
    f: float               # focal length, mm
    d: float               # aperture f-number
    r: float               # aspect ratio (width / height)

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "l", np.asarray(self.l, dtype=float))
        object.__setattr__(self, "f", float(self.f))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "r", float(self.r))

    def validate(self, aspect_set=None) -> None:
        if self.p.shape != (3,) or self.l.shape != (3,):
            raise InvalidCameraError("p and l must be 3-vectors")
        if not np.all(np.isfinite(self.p)) or not np.all(np.isfinite(self.l)):
            raise InvalidCameraError("non-finite camera parameters")
        if float(np.linalg.norm(self.p - self.l)) < 1e-9:
            raise InvalidCameraError("camera position equals look-at point")
        if not FOCAL_RANGE[0] <= self.f <= FOCAL_RANGE[1]:
            raise InvalidCameraError(f"focal length {self.f} outside {FOCAL_RANGE}")
        if not APERTURE_RANGE[0] <= self.d <= APERTURE_RANGE[1]:
            raise InvalidCameraError(f"aperture {self.d} outside {APERTURE_RANGE}")
        if aspect_set is not None and not any(abs(self.r - a) < 1e-9 for a in aspect_set):
            raise InvalidCameraError(f"aspect ratio {self.r} not in allowed set")

    def is_valid(self, aspect_set=None) -> bool:
        try:
            self.validate(aspect_set)
            return True
        except InvalidCameraError:
            return False

    def with_aspect(self, r: float) -> "CameraState":
        return replace(self, r=float(r))

    def to_dict(self) -> dict:
        return {
            "p": [float(v) for v in self.p],
            "l": [float(v) for v in self.l],
            "f": self.f,
            "d": self.d,
            "r": self.r,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CameraState":
        return cls(p=doc["p"], l=doc["l"], f=doc["f"], d=doc["d"], r=doc["r"])


@dataclass(frozen=True)
class ScreenBox:
    u_min: float
    v_min: float
    u_max: float
    v_max: float
    coverage: float          # clipped frame-area fraction
    fully_inside: bool
    # pre-frame-clip rectangle, used for clipping-fraction estimates
    raw_u_min: float = 0.0
    raw_v_min: float = 0.0
    raw_u_max: float = 0.0
    raw_v_max: float = 0.0

    @property
    def center(self) -> tuple:
        return ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)

    @property
    def raw_area(self) -> float:
        return max(0.0, self.raw_u_max - self.raw_u_min) * max(0.0, self.raw_v_max - self.raw_v_min)


@dataclass(frozen=True)
class RuleSignals:
    m1: int
    m2: float
    subject_visible: bool
    hard_failure: Optional[str] = None


def camera_basis(cam: CameraState):
    """Right/up/forward unit vectors; roll fixed to zero against world +Z."""
    forward = cam.l - cam.p
    norm = float(np.linalg.norm(forward))
    if norm < 1e-9:
        raise InvalidCameraError("camera position equals look-at point")
    forward = forward / norm
    world_up = np.array([0.0, 0.0, 1.0])
    if abs(float(np.dot(forward, world_up))) > 1.0 - 1e-9:
        world_up = np.array([0.0, 1.0, 0.0])  # straight up/down view
    right = np.cross(forward, world_up)
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return right, up, forward


def _tan_half_fov(cam: CameraState):
    tan_h = (SENSOR_WIDTH_MM / 2.0) / cam.f
    tan_v = (SENSOR_WIDTH_MM / cam.r / 2.0) / cam.f
    return tan_h, tan_v


def project_point(cam: CameraState, world) -> Optional[tuple]:
    """Pinhole projection to (u, v, depth); None for points at/behind the camera."""
    right, up, forward = camera_basis(cam)
    rel = np.asarray(world, dtype=float) - cam.p
    depth = float(np.dot(rel, forward))
    if depth <= NEAR_PLANE:
        return None
    tan_h, tan_v = _tan_half_fov(cam)
    u = 0.5 + 0.5 * (float(np.dot(rel, right)) / depth) / tan_h
    v = 0.5 - 0.5 * (float(np.dot(rel, up)) / depth) / tan_v
    return (u, v, depth)


def _box_corners(obj: SceneObject) -> np.ndarray:
    lo, hi = obj.aabb_min, obj.aabb_max
    return np.array([
        [x, y, z]
        for x in (lo[0], hi[0])
        for y in (lo[1], hi[1])
        for z in (lo[2], hi[2])
    ], dtype=float)


_BOX_EDGES = (
    (0, 1), (2, 3), (4, 5), (6, 7),
    (0, 2), (1, 3), (4, 6), (5, 7),
    (0, 4), (1, 5), (2, 6), (3, 7),
)


def project_box(cam: CameraState, obj: SceneObject, clip_near: float = 1e-4) -> ScreenBox:
    """Screen-space bounding rectangle of a box, with near-plane edge clipping."""
    right, up, forward = camera_basis(cam)
    corners = _box_corners(obj)
    rel = corners - cam.p
    x = rel @ right
    y = rel @ up
    z = rel @ forward

    pts = []
    for i in range(8):
        if z[i] > clip_near:
            pts.append((x[i], y[i], z[i]))
    for a, b in _BOX_EDGES:
        za, zb = z[a], z[b]
        if (za > clip_near) != (zb > clip_near):
            t = (clip_near - za) / (zb - za)
            pts.append((x[a] + t * (x[b] - x[a]), y[a] + t * (y[b] - y[a]), clip_near))

    if not pts:
        return ScreenBox(0.0, 0.0, 0.0, 0.0, coverage=0.0, fully_inside=False)

    tan_h, tan_v = _tan_half_fov(cam)
    us = [0.5 + 0.5 * (px / pz) / tan_h for px, py, pz in pts]
    vs = [0.5 - 0.5 * (py / pz) / tan_v for px, py, pz in pts]
    raw = (min(us), min(vs), max(us), max(vs))

    u0, v0 = max(0.0, raw[0]), max(0.0, raw[1])
    u1, v1 = min(1.0, raw[2]), min(1.0, raw[3])
    if u0 >= u1 or v0 >= v1:
        return ScreenBox(0.0, 0.0, 0.0, 0.0, coverage=0.0, fully_inside=False,
                         raw_u_min=raw[0], raw_v_min=raw[1], raw_u_max=raw[2], raw_v_max=raw[3])

    fully = (
        len(pts) >= 8
        and all(z[i] > clip_near for i in range(8))
        and 0.0 <= raw[0] and raw[2] <= 1.0
        and 0.0 <= raw[1] and raw[3] <= 1.0
    )
    return ScreenBox(
        u_min=u0, v_min=v0, u_max=u1, v_max=v1,
        coverage=(u1 - u0) * (v1 - v0),
        fully_inside=fully,
        raw_u_min=raw[0], raw_v_min=raw[1], raw_u_max=raw[2], raw_v_max=raw[3],
    )


def rule_m1(cam: CameraState, subject: SceneObject, placement_pref: Optional[str] = None) -> RuleSignals:
    """In-frame and half-screen placement check; returns the full rule-signal pair."""
    try:
        cam.validate()
        proj = project_point(cam, subject.center)
    except InvalidCameraError:
        return RuleSignals(m1=0, m2=0.0, subject_visible=False, hard_failure="invalid_camera")
    if proj is None:
        return RuleSignals(m1=0, m2=0.0, subject_visible=False)
    u, v, _ = proj
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        return RuleSignals(m1=0, m2=0.0, subject_visible=False)
    ok = True
    # exact half-screen boundary counts as a violation
    if placement_pref == "left":
        ok = u < 0.5
    elif placement_pref == "right":
        ok = u > 0.5
    elif placement_pref == "top":
        ok = v < 0.5
    elif placement_pref == "bottom":
        ok = v > 0.5
    return RuleSignals(m1=1 if ok else 0, m2=0.0, subject_visible=True)


THIRDS_TARGETS = {
    "thirds-left": (1.0 / 3.0, 0.5),
    "thirds-right": (2.0 / 3.0, 0.5),
    "thirds-top": (0.5, 1.0 / 3.0),
    "thirds-bottom": (0.5, 2.0 / 3.0),
    "thirds-top-left": (1.0 / 3.0, 1.0 / 3.0),
    "thirds-top-right": (2.0 / 3.0, 1.0 / 3.0),
    "thirds-bottom-left": (1.0 / 3.0, 2.0 / 3.0),
    "thirds-bottom-right": (2.0 / 3.0, 2.0 / 3.0),
}


def composition_target(composition_pref: Optional[str]) -> tuple:
    return THIRDS_TARGETS.get(composition_pref, (0.5, 0.5))


def rule_m2(cam: CameraState, subject: SceneObject, composition_pref: Optional[str] = None) -> float:
    """max(0, 1 - d/0.45) where d is screen distance from the subject center to the target."""
    try:
        cam.validate()
        proj = project_point(cam, subject.center)
    except InvalidCameraError:
        return 0.0
    if proj is None:
        return 0.0
    u, v, _ = proj
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        return 0.0
    tu, tv = composition_target(composition_pref)
    dist = float(np.hypot(u - tu, v - tv))
    return max(0.0, 1.0 - dist / 0.45)


def _ray_hits_box(origin: np.ndarray, direction: np.ndarray, t_max: float,
                  lo: np.ndarray, hi: np.ndarray) -> bool:
    """Slab test for segment origin + t*direction, t in (eps, t_max - eps)."""
    t0, t1 = 0.0, t_max
    for axis in range(3):
        d = direction[axis]
        if abs(d) < 1e-12:
            if origin[axis] < lo[axis] or origin[axis] > hi[axis]:
                return False
            continue
        ta = (lo[axis] - origin[axis]) / d
        tb = (hi[axis] - origin[axis]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    eps = 1e-6 * max(t_max, 1.0)
    return t0 < t_max - eps and t1 > eps


def occlusion_fraction(cam: CameraState, scene: SceneModel, subject: SceneObject,
                       samples: int = OCCLUSION_SAMPLES) -> float:
    """Fraction of stratified subject-surface samples whose ray to the camera is blocked."""
    points = subject_surface_samples(cam, subject, samples)
    if len(points) == 0:
        return 1.0
    blockers = [o for o in scene.objects if o.id != subject.id]
    if not blockers:
        return 0.0
    blocked = 0
    for pt in points:
        direction = cam.p - pt
        dist = float(np.linalg.norm(direction))
        if dist < 1e-9:
            continue
        for o in blockers:
            if _ray_hits_box(pt, direction, 1.0, o.aabb_min, o.aabb_max):
                blocked += 1
                break
    return blocked / len(points)


def subject_surface_samples(cam: CameraState, subject: SceneObject, samples: int) -> np.ndarray:
    """Stratified samples on the subject's camera-facing box faces."""
    lo, hi = subject.aabb_min, subject.aabb_max
    center = subject.center
    faces = []
    for axis in range(3):
        for side, coord in ((-1, lo[axis]), (1, hi[axis])):
            normal = np.zeros(3)
            normal[axis] = side
            face_center = center.copy()
            face_center[axis] = coord
            if float(np.dot(cam.p - face_center, normal)) > 0:
                faces.append((axis, coord))
    if not faces:
        return np.zeros((0, 3))
    per_face = max(1, samples // len(faces))
    n = int(np.ceil(np.sqrt(per_face)))
    pts = []
    for axis, coord in faces:
        other = [a for a in range(3) if a != axis]
        # cell-center stratification, deterministic
        ticks = (np.arange(n) + 0.5) / n
        for ta in ticks:
            for tb in ticks:
                pt = np.empty(3)
                pt[axis] = coord
                pt[other[0]] = lo[other[0]] + ta * (hi[other[0]] - lo[other[0]])
                pt[other[1]] = lo[other[1]] + tb * (hi[other[1]] - lo[other[1]])
                pts.append(pt)
    return np.array(pts)


ANGLE_ORDER = ("low", "eye", "high", "top")


def camera_angle_category(cam: CameraState) -> str:
    """Coarse pitch class of the view direction: low / eye / high / top."""
    forward = cam.l - cam.p
    norm = float(np.linalg.norm(forward))
    if norm < 1e-9:
        return "eye"
    pitch = float(np.degrees(np.arcsin(np.clip(-forward[2] / norm, -1.0, 1.0))))
    # pitch > 0 means looking downward
    if pitch >= 65.0:
        return "top"
    if pitch >= 20.0:
        return "high"
    if pitch <= -15.0:
        return "low"
    return "eye"


def hard_failure_check(cam: CameraState, scene: SceneModel, eval_spec=None,
                       occlusion_threshold: float = EXTREME_OCCLUSION_FRACTION,
                       missing_coverage: float = SUBJECT_MISSING_COVERAGE) -> Optional[str]:
    """First matching tag among invalid_camera, subject_missing, extreme_occlusion,
    view_type_violation; None when no hard failure applies."""
    if not cam.is_valid() or scene.point_inside_any(cam.p):
        return "invalid_camera"
    subject_id = getattr(eval_spec, "primary_subject", None) if eval_spec is not None else None
    if subject_id is not None and scene.has_object(subject_id):
        subject = scene.object_by_id(subject_id)
        box = project_box(cam, subject)
        if box.coverage < missing_coverage:
            return "subject_missing"
        if occlusion_fraction(cam, scene, subject) >= occlusion_threshold:
            return "extreme_occlusion"
    angle_pref = getattr(eval_spec, "angle_pref", None) if eval_spec is not None else None
    if angle_pref in ANGLE_ORDER:
        actual = camera_angle_category(cam)
        if abs(ANGLE_ORDER.index(actual) - ANGLE_ORDER.index(angle_pref)) >= 2:
            return "view_type_violation"
    return None


def rule_signals(cam: CameraState, scene: SceneModel, subject: Optional[SceneObject],
                 placement_pref: Optional[str] = None,
                 composition_pref: Optional[str] = None,
                 eval_spec=None) -> RuleSignals:
    """Combined m1/m2 evaluation with hard-failure tagging."""
    hard = hard_failure_check(cam, scene, eval_spec)
    if hard == "invalid_camera":
        return RuleSignals(m1=0, m2=0.0, subject_visible=False, hard_failure=hard)
    if subject is None:
        # no primary subject: both rule signals are neutral-pass
        return RuleSignals(m1=1, m2=1.0, subject_visible=True, hard_failure=hard)
    base = rule_m1(cam, subject, placement_pref)
    m2 = rule_m2(cam, subject, composition_pref)
    return RuleSignals(m1=base.m1, m2=m2, subject_visible=base.subject_visible,
                       hard_failure=hard)
