"""Deterministic box-scene renderer plus the external-backend adapter contract.

Built-in backend: perspective rasterization of object boxes with painter's
ordering by face centroid depth, flat per-object colors hashed from the id,
and a horizon-gradient background. The subprocess adapter carries the same
request shape to external renderers (for example the Blender bridge) and maps
failures onto a fixed three-category taxonomy.
"""

from __future__ import annotations

import hashlib
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from .camera import CameraState, camera_basis, _tan_half_fov
from .scene import SceneModel

PREVIEW_WIDTH = 640
PREVIEW_SAMPLE_CAP = 64
FINAL_SAMPLES = 1024
FINAL_SCALE = 4

PREVIEW_TIMEOUT_S = 300.0
FINAL_TIMEOUT_S = 3600.0

FAILURE_CATEGORIES = ("timeout_no_first_image", "no_final_image", "backend_crash")


class RenderError(RuntimeError):
    def __init__(self, category: str, message: str = ""):
        super().__init__(message or category)
        self.category = category


def resolution_for(ratio: float, quality: str) -> tuple:
    """Preview: 640 x round-to-even(640/r); final: 4x both."""
    if ratio <= 0:
        raise ValueError("aspect ratio must be positive")
    if quality == "preview":
        w = PREVIEW_WIDTH
    elif quality == "final":
        w = PREVIEW_WIDTH * FINAL_SCALE
    else:
        raise ValueError(f"unknown quality {quality!r}")
    h = int(round(w / ratio))
    if h % 2:
        h -= 1
    return (w, max(h, 2))


@dataclass(frozen=True)
class RenderRequest:
    camera: CameraState
    quality: str = "preview"                 # preview | final
    sample_cap: Optional[int] = None

    def __post_init__(self):
        if self.quality not in ("preview", "final"):
            raise ValueError(f"unknown quality {self.quality!r}")
        if self.quality == "preview":
            cap = self.sample_cap if self.sample_cap is not None else PREVIEW_SAMPLE_CAP
            object.__setattr__(self, "sample_cap", min(cap, PREVIEW_SAMPLE_CAP))
        elif self.sample_cap is None:
            object.__setattr__(self, "sample_cap", FINAL_SAMPLES)

    @property
    def resolution(self) -> tuple:
        return resolution_for(self.camera.r, self.quality)


@dataclass
class RenderResult:
    image: Image.Image
    stats: dict = field(default_factory=dict)
    path: Optional[str] = None
    warning: Optional[str] = None

    def save(self, path) -> str:
        self.image.save(path, format="PNG")
        self.path = str(path)
        return self.path


def object_color(obj_id: str) -> tuple:
    """Stable flat color from the object id, kept away from background tones."""
    digest = hashlib.md5(obj_id.encode("utf-8")).digest()
    return tuple(40 + (b * 180) // 255 for b in digest[:3])


def _background(width: int, height: int) -> np.ndarray:
    """Vertical horizon gradient: pale sky fading into darker ground."""
    top = np.array([168.0, 196.0, 222.0])
    bottom = np.array([64.0, 60.0, 52.0])
    t = np.linspace(0.0, 1.0, height)[:, None]
    rows = top[None, :] * (1.0 - t) + bottom[None, :] * t
    return np.repeat(rows[:, None, :], width, axis=1).astype(np.uint8)


_FACES = (
    (0, 1, 3, 2), (4, 5, 7, 6),   # x-constant faces (corner index bits are x,y,z)
    (0, 1, 5, 4), (2, 3, 7, 6),   # y-constant
    (0, 2, 6, 4), (1, 3, 7, 5),   # z-constant
)


def _box_corners_array(lo, hi) -> np.ndarray:
    return np.array([
        [x, y, z]
        for x in (lo[0], hi[0])
        for y in (lo[1], hi[1])
        for z in (lo[2], hi[2])
    ], dtype=float)


def _clip_polygon_near(poly_cam: list, near: float) -> list:
    """Sutherland-Hodgman clip of a camera-space polygon against depth >= near."""
    out = []
    n = len(poly_cam)
    for i in range(n):
        a = poly_cam[i]
        b = poly_cam[(i + 1) % n]
        a_in = a[2] >= near
        b_in = b[2] >= near
        if a_in:
            out.append(a)
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            out.append(a + t * (b - a))
    return out


def render(scene: SceneModel, request: RenderRequest) -> RenderResult:
    """Deterministic rasterization of the scene's boxes for the given camera."""
    cam = request.camera
    cam.validate()
    width, height = request.resolution
    buf = _background(width, height)
    img = Image.fromarray(buf, mode="RGB")
    draw = ImageDraw.Draw(img)

    right, up, forward = camera_basis(cam)
    tan_h, tan_v = _tan_half_fov(cam)
    near = 1e-4

    faces = []
    for obj in scene.objects:
        corners = _box_corners_array(obj.aabb_min, obj.aabb_max)
        rel = corners - cam.p
        cam_pts = np.stack([rel @ right, rel @ up, rel @ forward], axis=1)
        color = object_color(obj.id)
        for face in _FACES:
            poly = [cam_pts[i] for i in face]
            clipped = _clip_polygon_near(poly, near)
            if len(clipped) < 3:
                continue
            depth = float(np.mean([p[2] for p in clipped]))
            faces.append((depth, obj.id, clipped, color))

    # painter's order: far faces first; id breaks ties for determinism
    faces.sort(key=lambda f: (-f[0], f[1]))
    for depth, _, poly, color in faces:
        pts = []
        for p in poly:
            u = 0.5 + 0.5 * (p[0] / p[2]) / tan_h
            v = 0.5 - 0.5 * (p[1] / p[2]) / tan_v
            pts.append((u * width, v * height))
        draw.polygon(pts, fill=color)

    warning = "camera_inside_geometry" if scene.point_inside_any(cam.p) else None
    stats = {"backend": "builtin", "samples": request.sample_cap,
             "width": width, "height": height}
    return RenderResult(image=img, stats=stats, warning=warning)


def render_parallel(scene: SceneModel, requests, workers: int = 1,
                    render_fn=None, fail_hook=None) -> list:
    """Order-preserving parallel rendering with per-request failure isolation.

    Returns a list aligned with `requests`; failed entries are RenderError
    instances carrying one of the three failure categories. `fail_hook` lets
    tests force failures for specific request indices.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    fn = render_fn or render

    def one(idx_request):
        idx, request = idx_request
        try:
            if fail_hook is not None:
                forced = fail_hook(idx, request)
                if forced is not None:
                    return RenderError(forced, f"forced failure for request {idx}")
            return fn(scene, request)
        except RenderError as exc:
            return exc
        except Exception as exc:  # backend crashes never abort the batch
            return RenderError("backend_crash", str(exc))

    items = list(enumerate(requests))
    if workers == 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


@dataclass(frozen=True)
class SubprocessBackend:
    """Adapter for external renderers honoring the fixed argument contract.

    Invocation: command + [scene_path, px, py, pz, lx, ly, lz, f, d, r,
    width, height, samples, out_path]; exit 0 on success with the image
    written at out_path.
    """
    command: tuple
    scene_path: str
    out_dir: str
    preview_timeout: float = PREVIEW_TIMEOUT_S
    final_timeout: float = FINAL_TIMEOUT_S

    def __call__(self, scene: SceneModel, request: RenderRequest) -> RenderResult:
        import os
        cam = request.camera
        width, height = request.resolution
        out_path = os.path.join(
            self.out_dir,
            f"ext_{hashlib.md5(repr(cam.to_dict()).encode()).hexdigest()[:12]}_{request.quality}.png",
        )
        args = list(self.command) + [
            self.scene_path,
            *(str(float(v)) for v in cam.p),
            *(str(float(v)) for v in cam.l),
            str(cam.f), str(cam.d), str(cam.r),
            str(width), str(height), str(request.sample_cap), out_path,
        ]
        timeout = self.preview_timeout if request.quality == "preview" else self.final_timeout
        try:
            proc = subprocess.run(args, capture_output=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            raise RenderError("timeout_no_first_image",
                              f"external renderer exceeded {timeout}s")
        if proc.returncode != 0:
            raise RenderError("backend_crash",
                              f"exit {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}")
        if not os.path.exists(out_path):
            raise RenderError("no_final_image", "backend exited 0 but wrote no image")
        img = Image.open(out_path).convert("RGB")
        return RenderResult(image=img, path=out_path,
                            stats={"backend": "subprocess", "samples": request.sample_cap,
                                   "width": img.width, "height": img.height})
