"""Blender adapter for the camsearch external-renderer contract.

Run headless:

    blender --background --factory-startup --python bridge.py -- \
        scene.json px py pz lx ly lz f d r width height samples out.png

The fourteen positional arguments match camsearch.render.SubprocessBackend.
A second mode exports the open Blender file's mesh bounding boxes as a
camsearch scene document:

    blender --background file.blend --python bridge.py -- export_summary out.json

Preview-resolution renders (width <= 640) have their sample count clamped to
64 so a misconfigured caller cannot burn a preview slot at final quality.
Every render writes a `<out_path>.stats` JSON sidecar with the settings that
were actually used. Render settings touched on the Blender scene are restored
afterwards, so the bridge can run inside a live session without side effects.

All functions take the bpy module as an argument so the logic is testable
without Blender installed.
"""

import json
import math
import sys

PREVIEW_WIDTH_MAX = 640
PREVIEW_SAMPLE_CAP = 64

FOCAL_RANGE = (8.0, 400.0)
FSTOP_RANGE = (0.95, 22.0)
SENSOR_WIDTH_MM = 36.0


class BridgeError(ValueError):
    """Malformed invocation or scene document."""


def parse_argv(argv):
    """Arguments after the '--' separator; returns a mode-tagged dict."""
    if argv and argv[0] == "export_summary":
        if len(argv) != 2:
            raise BridgeError("export_summary takes exactly one argument: out_path")
        return {"mode": "export_summary", "out_path": argv[1]}
    if len(argv) != 14:
        raise BridgeError(f"render mode takes 14 arguments, got {len(argv)}")
    try:
        p = tuple(float(v) for v in argv[1:4])
        look = tuple(float(v) for v in argv[4:7])
        f, d, r = float(argv[7]), float(argv[8]), float(argv[9])
        width, height, samples = int(argv[10]), int(argv[11]), int(argv[12])
    except ValueError as exc:
        raise BridgeError(f"unparseable numeric argument: {exc}") from exc
    if not FOCAL_RANGE[0] <= f <= FOCAL_RANGE[1]:
        raise BridgeError(f"focal length {f} outside {FOCAL_RANGE}")
    if not FSTOP_RANGE[0] <= d <= FSTOP_RANGE[1]:
        raise BridgeError(f"aperture {d} outside {FSTOP_RANGE}")
    if r <= 0 or width <= 0 or height <= 0 or samples <= 0:
        raise BridgeError("aspect, resolution and samples must be positive")
    if math.dist(p, look) < 1e-6:
        raise BridgeError("camera position coincides with look-at target")
    return {
        "mode": "render",
        "scene_path": argv[0],
        "p": p, "l": look, "f": f, "d": d, "r": r,
        "width": width, "height": height, "samples": samples,
        "out_path": argv[13],
    }


def load_scene_doc(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    objects = doc.get("objects")
    if not objects:
        raise BridgeError(f"{path}: scene has no objects")
    for entry in objects:
        for key in ("id", "aabb_min", "aabb_max"):
            if key not in entry:
                raise BridgeError(f"{path}: object missing {key!r}")
        if any(b < a for a, b in zip(entry["aabb_min"], entry["aabb_max"])):
            raise BridgeError(f"{path}: object {entry['id']!r} has inverted bounds")
    return doc


def clamp_samples(width, samples):
    if width <= PREVIEW_WIDTH_MAX:
        return min(samples, PREVIEW_SAMPLE_CAP)
    return samples


def focus_distance(p, look):
    return math.dist(p, look)


def camera_rotation(p, look):
    """Euler XYZ angles aiming the camera at `look` with zero roll.

    Blender cameras face local -Z with +Y up; yaw around world Z then pitch
    keeps the camera's right axis horizontal.
    """
    fx, fy, fz = (b - a for a, b in zip(p, look))
    norm = math.sqrt(fx * fx + fy * fy + fz * fz)
    fx, fy, fz = fx / norm, fy / norm, fz / norm
    theta = math.acos(max(-1.0, min(1.0, -fz)))
    s = math.sqrt(max(0.0, 1.0 - fz * fz))
    phi = 0.0 if s < 1e-9 else math.atan2(-fx / s, fy / s)
    return (theta, 0.0, phi)


def build_scene(bpy, doc):
    """Replace all objects in the Blender scene with one cube per scene box."""
    for obj in list(bpy.data.objects):
        bpy.data.objects.remove(obj, do_unlink=True)
    created = []
    for entry in doc["objects"]:
        lo, hi = entry["aabb_min"], entry["aabb_max"]
        center = tuple((a + b) / 2.0 for a, b in zip(lo, hi))
        half = tuple(max((b - a) / 2.0, 1e-6) for a, b in zip(lo, hi))
        bpy.ops.mesh.primitive_cube_add(size=2.0, location=center)
        obj = bpy.context.active_object
        obj.name = entry["id"]
        obj.scale = half
        created.append(obj)
    return created


def setup_camera(bpy, params):
    bpy.ops.object.camera_add(location=params["p"])
    cam_obj = bpy.context.active_object
    cam_obj.name = "bridge_camera"
    cam_obj.rotation_euler = camera_rotation(params["p"], params["l"])
    cam = cam_obj.data
    cam.lens = params["f"]
    cam.sensor_width = SENSOR_WIDTH_MM
    cam.sensor_fit = "HORIZONTAL"
    cam.dof.use_dof = True
    cam.dof.aperture_fstop = params["d"]
    cam.dof.focus_distance = focus_distance(params["p"], params["l"])
    bpy.context.scene.camera = cam_obj
    return cam_obj


def apply_render_settings(bpy, width, height, samples, out_path):
    """Set render output; returns the previous values for restoration."""
    scene = bpy.context.scene
    saved = {
        "engine": scene.render.engine,
        "resolution_x": scene.render.resolution_x,
        "resolution_y": scene.render.resolution_y,
        "resolution_percentage": scene.render.resolution_percentage,
        "filepath": scene.render.filepath,
        "file_format": scene.render.image_settings.file_format,
        "samples": getattr(scene.cycles, "samples", None),
    }
    scene.render.engine = "CYCLES"
    scene.render.resolution_x = width
    scene.render.resolution_y = height
    scene.render.resolution_percentage = 100
    scene.render.filepath = out_path
    scene.render.image_settings.file_format = "PNG"
    scene.cycles.samples = samples
    return saved


def restore_render_settings(bpy, saved):
    scene = bpy.context.scene
    scene.render.engine = saved["engine"]
    scene.render.resolution_x = saved["resolution_x"]
    scene.render.resolution_y = saved["resolution_y"]
    scene.render.resolution_percentage = saved["resolution_percentage"]
    scene.render.filepath = saved["filepath"]
    scene.render.image_settings.file_format = saved["file_format"]
    if saved["samples"] is not None:
        scene.cycles.samples = saved["samples"]


def run_render(bpy, params):
    doc = load_scene_doc(params["scene_path"])
    build_scene(bpy, doc)
    setup_camera(bpy, params)
    samples = clamp_samples(params["width"], params["samples"])
    saved = apply_render_settings(bpy, params["width"], params["height"],
                                  samples, params["out_path"])
    try:
        bpy.ops.render.render(write_still=True)
    finally:
        restore_render_settings(bpy, saved)
    stats = {
        "backend": "blender",
        "engine": "CYCLES",
        "width": params["width"],
        "height": params["height"],
        "samples": samples,
        "requested_samples": params["samples"],
        "focus_distance": focus_distance(params["p"], params["l"]),
        "objects": len(doc["objects"]),
    }
    with open(params["out_path"] + ".stats", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stats


class _Vec(tuple):
    """Minimal 3-vector stand-in used when mathutils is unavailable."""

    def __new__(cls, values):
        return super().__new__(cls, (float(values[0]), float(values[1]),
                                     float(values[2])))


def world_aabb(obj):
    """World-space AABB of a Blender object from its bound_box corners."""
    try:
        from mathutils import Vector as vec
    except ImportError:
        vec = _Vec
    corners = [obj.matrix_world @ vec(corner) for corner in obj.bound_box]
    lo = [min(c[i] for c in corners) for i in range(3)]
    hi = [max(c[i] for c in corners) for i in range(3)]
    return lo, hi


def run_export_summary(bpy, params):
    """Write the open file's mesh objects as a camsearch scene document."""
    objects = []
    for obj in bpy.data.objects:
        if getattr(obj, "type", None) != "MESH":
            continue
        lo, hi = world_aabb(obj)
        objects.append({
            "id": obj.name,
            "label": obj.name,
            "aabb_min": lo,
            "aabb_max": hi,
        })
    if not objects:
        raise BridgeError("no mesh objects to export")
    objects.sort(key=lambda o: o["id"])
    doc = {"format_version": 1, "objects": objects}
    with open(params["out_path"], "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def main(argv=None, bpy=None):
    if argv is None:
        # blender passes its own args first; ours follow the '--' separator
        argv = sys.argv[sys.argv.index("--") + 1:] if "--" in sys.argv else []
    if bpy is None:
        import bpy  # noqa: F811  (only importable inside Blender)
    params = parse_argv(list(argv))
    if params["mode"] == "export_summary":
        run_export_summary(bpy, params)
    else:
        run_render(bpy, params)
    return 0


if __name__ == "__main__":
    sys.exit(main())
