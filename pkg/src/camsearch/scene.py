"""Box-decomposed scene model and scouting summaries.

Scenes are collections of axis-aligned boxes; that is enough substrate for
projection-side composition checks, visibility estimates, and the built-in
renderer. Meshes stay on the external-renderer side of the fence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SCENE_FORMAT_VERSION = 1

# occupancy grid used for open-region detection (x, y, z cells)
OPEN_REGION_GRID = (8, 8, 4)


class SceneError(ValueError):
    """Malformed or invalid scene input."""


@dataclass(frozen=True)
class SceneObject:
    id: str
    label: str
    aabb_min: np.ndarray
    aabb_max: np.ndarray
    tags: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "aabb_min", np.asarray(self.aabb_min, dtype=float))
        object.__setattr__(self, "aabb_max", np.asarray(self.aabb_max, dtype=float))
        if self.aabb_min.shape != (3,) or self.aabb_max.shape != (3,):
            raise SceneError(f"object {self.id!r}: aabb_min/aabb_max must be 3-vectors")
        if np.any(self.aabb_min > self.aabb_max):
            raise SceneError(f"object {self.id!r}: aabb_min exceeds aabb_max")

    @property
    def center(self) -> np.ndarray:
        return (self.aabb_min + self.aabb_max) / 2.0

    @property
    def extent(self) -> np.ndarray:
        return self.aabb_max - self.aabb_min

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.aabb_min) and np.all(p <= self.aabb_max))


@dataclass(frozen=True)
class SceneModel:
    """Immutable after construction; safe to share across readers."""

    objects: tuple
    scene_aabb_min: np.ndarray = field(init=False)
    scene_aabb_max: np.ndarray = field(init=False)
    scene_scale: float = field(init=False)

    def __post_init__(self):
        objects = tuple(self.objects)
        object.__setattr__(self, "objects", objects)
        if not objects:
            raise SceneError("scene has no objects")
        ids = [o.id for o in objects]
        if len(set(ids)) != len(ids):
            raise SceneError("duplicate object ids in scene")
        lo = np.min(np.stack([o.aabb_min for o in objects]), axis=0)
        hi = np.max(np.stack([o.aabb_max for o in objects]), axis=0)
        object.__setattr__(self, "scene_aabb_min", lo)
        object.__setattr__(self, "scene_aabb_max", hi)
        scale = float(np.max(hi - lo))
        if scale <= 0:
            # degenerate all-point scenes still need a positive normalizer
            scale = 1.0
        object.__setattr__(self, "scene_scale", scale)

    @property
    def centroid(self) -> np.ndarray:
        return (self.scene_aabb_min + self.scene_aabb_max) / 2.0

    @property
    def scene_height(self) -> float:
        return float(self.scene_aabb_max[2] - self.scene_aabb_min[2])

    def object_by_id(self, obj_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise KeyError(obj_id)

    def has_object(self, obj_id: str) -> bool:
        return any(o.id == obj_id for o in self.objects)

    def point_inside_any(self, point) -> bool:
        return any(o.contains(point) for o in self.objects)


@dataclass(frozen=True)
class TopologySummary:
    dominant_objects: tuple      # ids ranked by volume desc, ties by id
    foreground_ids: tuple
    background_ids: tuple
    vertical_structure: str      # flat | layered | tower
    open_regions: tuple          # 3-vector centers of the largest open component


def load_scene(path) -> SceneModel:
    """Load a scene document (JSON, format_version 1)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scene_from_dict(doc, source=str(path))


def scene_from_dict(doc: dict, source: str = "<dict>") -> SceneModel:
    if not isinstance(doc, dict):
        raise SceneError(f"{source}: scene document must be an object")
    version = doc.get("format_version")
    if version != SCENE_FORMAT_VERSION:
        raise SceneError(f"{source}: unsupported format_version {version!r}")
    raw_objects = doc.get("objects")
    if not isinstance(raw_objects, list) or not raw_objects:
        raise SceneError(f"{source}: 'objects' must be a non-empty list")
    objects = []
    for entry in raw_objects:
        obj_id = entry.get("id", "<missing id>")
        for field_name in ("id", "label", "aabb_min", "aabb_max"):
            if field_name not in entry:
                raise SceneError(f"{source}: object {obj_id!r} missing field {field_name!r}")
        objects.append(
            SceneObject(
                id=entry["id"],
                label=entry["label"],
                aabb_min=entry["aabb_min"],
                aabb_max=entry["aabb_max"],
                tags=frozenset(entry.get("tags", [])),
            )
        )
    return SceneModel(objects=tuple(objects))


def scene_to_dict(scene: SceneModel) -> dict:
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "objects": [
            {
                "id": o.id,
                "label": o.label,
                "aabb_min": [float(v) for v in o.aabb_min],
                "aabb_max": [float(v) for v in o.aabb_max],
                "tags": sorted(o.tags),
            }
            for o in scene.objects
        ],
    }


def save_scene(scene: SceneModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
        fh.write("\n")


def geometric_summary(scene: SceneModel) -> list:
    """Per-object centers, volumes, and extents, ordered by id."""
    out = []
    for o in sorted(scene.objects, key=lambda o: o.id):
        out.append(
            {
                "id": o.id,
                "label": o.label,
                "center": [float(v) for v in o.center],
                "extent": [float(v) for v in o.extent],
                "volume": o.volume,
                "tags": sorted(o.tags),
            }
        )
    return out


def _vertical_structure(scene: SceneModel) -> str:
    height = scene.scene_height
    if height <= 0:
        return "flat"
    for o in scene.objects:
        ext = o.extent
        horizontal = max(float(ext[0]), float(ext[1]))
        if horizontal > 0 and float(ext[2]) > 3.0 * horizontal and float(ext[2]) > 0.5 * height:
            return "tower"
    centers_z = np.array([float(o.center[2]) for o in scene.objects])
    span = centers_z.max() - centers_z.min()
    if span > 0.5 * height:
        # count distinct height bands (fifths of scene height)
        z0 = float(scene.scene_aabb_min[2])
        bands = {int(np.clip((z - z0) / height * 5, 0, 4)) for z in centers_z}
        if len(bands) >= 3:
            return "layered"
    return "flat"


def _open_regions(scene: SceneModel) -> tuple:
    """Centers of the largest connected open component on a coarse occupancy grid."""
    nx, ny, nz = OPEN_REGION_GRID
    lo, hi = scene.scene_aabb_min, scene.scene_aabb_max
    size = np.maximum(hi - lo, 1e-9)
    step = size / np.array([nx, ny, nz], dtype=float)

    occupied = np.zeros((nx, ny, nz), dtype=bool)
    for o in scene.objects:
        i0 = np.floor((o.aabb_min - lo) / step).astype(int)
        i1 = np.ceil((o.aabb_max - lo) / step).astype(int)
        i0 = np.clip(i0, 0, [nx - 1, ny - 1, nz - 1])
        i1 = np.clip(i1, 1, [nx, ny, nz])
        occupied[i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]] = True

    open_cells = ~occupied
    if not open_cells.any():
        return ()

    # largest 6-connected open component via flood fill
    visited = np.zeros_like(open_cells)
    best_component = []
    for idx in np.argwhere(open_cells):
        idx = tuple(idx)
        if visited[idx]:
            continue
        stack = [idx]
        visited[idx] = True
        component = []
        while stack:
            cur = stack.pop()
            component.append(cur)
            for axis in range(3):
                for delta in (-1, 1):
                    nb = list(cur)
                    nb[axis] += delta
                    nb = tuple(nb)
                    if 0 <= nb[0] < nx and 0 <= nb[1] < ny and 0 <= nb[2] < nz:
                        if open_cells[nb] and not visited[nb]:
                            visited[nb] = True
                            stack.append(nb)
        if len(component) > len(best_component):
            best_component = sorted(component)

    centers = []
    for (i, j, k) in best_component:
        centers.append(tuple(float(v) for v in lo + (np.array([i, j, k]) + 0.5) * step))
    return tuple(centers)


def topology_summary(scene: SceneModel) -> TopologySummary:
    """Dominance ranking, foreground/background split, vertical structure, open regions."""
    ranked = sorted(scene.objects, key=lambda o: (-o.volume, o.id))
    centroid = scene.centroid
    dists = {o.id: float(np.linalg.norm(o.center - centroid)) for o in scene.objects}
    median = float(np.median(sorted(dists.values())))
    foreground = tuple(sorted(oid for oid, d in dists.items() if d <= median))
    background = tuple(sorted(oid for oid, d in dists.items() if d > median))
    return TopologySummary(
        dominant_objects=tuple(o.id for o in ranked),
        foreground_ids=foreground,
        background_ids=background,
        vertical_structure=_vertical_structure(scene),
        open_regions=_open_regions(scene),
    )


def topology_to_dict(topo: TopologySummary) -> dict:
    return {
        "dominant_objects": list(topo.dominant_objects),
        "foreground_ids": list(topo.foreground_ids),
        "background_ids": list(topo.background_ids),
        "vertical_structure": topo.vertical_structure,
        "open_regions": [list(c) for c in topo.open_regions],
    }
