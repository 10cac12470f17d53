from __future__ import annotations

import numpy as np
import pytest

from camsearch.camera import CameraState, project_box
from camsearch.render import (RenderError, RenderRequest, SubprocessBackend,
                              object_color, render, render_parallel, resolution_for)


def cam(r=1.5, p=(0, -8, 1), l=(0, 0, 0)):
    return CameraState(p=p, l=l, f=50.0, d=5.6, r=r)


class TestResolution:
    def test_preview_examples(self):
        assert resolution_for(16 / 9, "preview") == (640, 360)
        assert resolution_for(1.0, "preview") == (640, 640)
        assert resolution_for(1.5, "preview") == (640, 426)

    def test_final_examples(self):
        assert resolution_for(16 / 9, "final") == (2560, 1440)
        assert resolution_for(1.5, "final") == (2560, 1706)

    def test_heights_always_even(self):
        for r in (0.9, 1.0, 1.21, 1.5, 16 / 9, 2.35):
            for quality in ("preview", "final"):
                _, h = resolution_for(r, quality)
                assert h % 2 == 0

    def test_rejects_nonpositive_ratio(self):
        with pytest.raises(ValueError):
            resolution_for(0.0, "preview")


class TestRequest:
    def test_preview_sample_cap(self):
        assert RenderRequest(camera=cam()).sample_cap == 64
        assert RenderRequest(camera=cam(), sample_cap=16).sample_cap == 16
        assert RenderRequest(camera=cam(), sample_cap=9999).sample_cap == 64

    def test_final_samples_default(self):
        assert RenderRequest(camera=cam(), quality="final").sample_cap == 1024

    def test_unknown_quality_rejected(self):
        with pytest.raises(ValueError):
            RenderRequest(camera=cam(), quality="draft")


def test_object_color_stable_and_distinct():
    assert object_color("cube") == object_color("cube")
    assert object_color("cube") != object_color("wall")
    for channel in object_color("anything"):
        assert 40 <= channel <= 220


class TestRender:
    def test_deterministic_bytes(self, walled_scene):
        a = render(walled_scene, RenderRequest(camera=cam()))
        b = render(walled_scene, RenderRequest(camera=cam()))
        assert a.image.tobytes() == b.image.tobytes()

    def test_resolution_matches_aspect(self, walled_scene):
        result = render(walled_scene, RenderRequest(camera=cam(r=16 / 9)))
        assert result.image.size == (640, 360)

    def test_subject_pixels_match_projection(self, unit_cube_scene):
        # rasterized footprint of the cube agrees with project_box within 2 px
        camera = cam(p=(0, -6, 0), l=(0, 0, 0))
        result = render(unit_cube_scene, RenderRequest(camera=camera))
        box = project_box(camera, unit_cube_scene.objects[0])
        arr = np.asarray(result.image)
        color = object_color("cube")
        mask = np.all(arr == color, axis=-1)
        ys, xs = np.nonzero(mask)
        assert len(xs) > 0
        w, h = result.image.size
        assert abs(xs.min() - box.u_min * w) <= 2
        assert abs(xs.max() + 1 - box.u_max * w) <= 2
        assert abs(ys.min() - box.v_min * h) <= 2
        assert abs(ys.max() + 1 - box.v_max * h) <= 2

    def test_nearer_box_occludes_farther(self):
        from camsearch.scene import SceneModel, SceneObject
        scene = SceneModel(objects=(
            SceneObject(id="near", label="n", aabb_min=(-1, -4, -1), aabb_max=(1, -3, 1)),
            SceneObject(id="far", label="f", aabb_min=(-1, 3, -1), aabb_max=(1, 4, 1)),
        ))
        result = render(scene, RenderRequest(camera=cam(p=(0, -10, 0), l=(0, 0, 0))))
        arr = np.asarray(result.image)
        center = arr[arr.shape[0] // 2, arr.shape[1] // 2]
        assert tuple(center) == object_color("near")

    def test_camera_inside_geometry_warns(self, walled_scene):
        result = render(walled_scene, RenderRequest(camera=cam(p=(0, 0, 1), l=(5, 0, 1))))
        assert result.warning == "camera_inside_geometry"

    def test_camera_straddling_box_stays_finite(self, walled_scene):
        # near-plane clipping: camera just outside a face looking through it
        result = render(walled_scene, RenderRequest(camera=cam(p=(1.01, 0, 1), l=(5, 0, 1))))
        assert result.image.size == (640, 426)

    def test_stats_carry_samples(self, unit_cube_scene):
        preview = render(unit_cube_scene, RenderRequest(camera=cam()))
        final = render(unit_cube_scene, RenderRequest(camera=cam(), quality="final"))
        assert preview.stats["samples"] == 64
        assert final.stats["samples"] == 1024

    def test_final_settings_unaffected_by_preview_batches(self, unit_cube_scene):
        # preview renders with tiny caps never leak into final quality
        for _ in range(3):
            render(unit_cube_scene, RenderRequest(camera=cam(), sample_cap=8))
        final = render(unit_cube_scene, RenderRequest(camera=cam(), quality="final"))
        assert final.stats["samples"] == 1024
        assert final.image.size == (2560, 1706)

    def test_save_roundtrip(self, unit_cube_scene, tmp_path):
        result = render(unit_cube_scene, RenderRequest(camera=cam()))
        path = tmp_path / "out.png"
        result.save(path)
        from PIL import Image
        again = Image.open(path).convert("RGB")
        assert again.tobytes() == result.image.tobytes()


class TestRenderParallel:
    def test_order_preserved_and_worker_independent(self, walled_scene):
        cams = [cam(p=(np.cos(t) * 10, np.sin(t) * 10, 2), l=(0, 0, 1))
                for t in np.linspace(0, 5, 6)]
        requests = [RenderRequest(camera=c) for c in cams]
        serial = render_parallel(walled_scene, requests, workers=1)
        threaded = render_parallel(walled_scene, requests, workers=4)
        for a, b in zip(serial, threaded):
            assert a.image.tobytes() == b.image.tobytes()

    def test_failure_isolated_to_slot(self, walled_scene):
        requests = [RenderRequest(camera=cam()) for _ in range(4)]
        def hook(idx, request):
            return "backend_crash" if idx == 2 else None
        results = render_parallel(walled_scene, requests, workers=2, fail_hook=hook)
        assert isinstance(results[2], RenderError)
        assert results[2].category == "backend_crash"
        for i in (0, 1, 3):
            assert not isinstance(results[i], RenderError)

    def test_unexpected_exception_becomes_backend_crash(self, walled_scene):
        def broken(scene, request):
            raise ZeroDivisionError("oops")
        results = render_parallel(walled_scene, [RenderRequest(camera=cam())],
                                  render_fn=broken)
        assert results[0].category == "backend_crash"

    def test_rejects_zero_workers(self, walled_scene):
        with pytest.raises(ValueError):
            render_parallel(walled_scene, [], workers=0)


class TestSubprocessBackend:
    def _backend(self, tmp_path, script):
        exe = tmp_path / "fake_renderer.py"
        exe.write_text(script)
        return SubprocessBackend(command=("python3", str(exe)),
                                 scene_path="scene.json", out_dir=str(tmp_path),
                                 preview_timeout=10.0)

    def test_argument_contract_and_success(self, unit_cube_scene, tmp_path):
        script = (
            "import sys, json\n"
            "args = sys.argv[1:]\n"
            "assert len(args) == 14, args\n"
            "scene, out_path = args[0], args[13]\n"
            "w, h, samples = int(args[10]), int(args[11]), int(args[12])\n"
            "from PIL import Image\n"
            "Image.new('RGB', (w, h), (10, 20, 30)).save(out_path)\n"
            "print(json.dumps({'scene': scene, 'samples': samples}))\n"
        )
        backend = self._backend(tmp_path, script)
        result = backend(unit_cube_scene, RenderRequest(camera=cam()))
        assert result.image.size == (640, 426)
        assert result.stats["backend"] == "subprocess"

    def test_crash_maps_to_backend_crash(self, unit_cube_scene, tmp_path):
        backend = self._backend(tmp_path, "import sys; sys.exit(3)\n")
        with pytest.raises(RenderError) as exc:
            backend(unit_cube_scene, RenderRequest(camera=cam()))
        assert exc.value.category == "backend_crash"

    def test_no_output_maps_to_no_final_image(self, unit_cube_scene, tmp_path):
        backend = self._backend(tmp_path, "pass\n")
        with pytest.raises(RenderError) as exc:
            backend(unit_cube_scene, RenderRequest(camera=cam()))
        assert exc.value.category == "no_final_image"

    def test_timeout_maps_to_timeout_category(self, unit_cube_scene, tmp_path):
        backend = self._backend(tmp_path, "import time; time.sleep(60)\n")
        backend = SubprocessBackend(command=backend.command, scene_path="scene.json",
                                    out_dir=str(tmp_path), preview_timeout=0.5)
        with pytest.raises(RenderError) as exc:
            backend(unit_cube_scene, RenderRequest(camera=cam()))
        assert exc.value.category == "timeout_no_first_image"
