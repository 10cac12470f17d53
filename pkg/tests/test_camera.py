from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camsearch.camera import (CameraState, InvalidCameraError, camera_angle_category,
                              hard_failure_check, project_box, project_point,
                              rule_m1, rule_m2)
from camsearch.scene import SceneObject


def cam(p, l, f=50.0, r=1.5):
    return CameraState(p=p, l=l, f=f, d=5.6, r=r)


def make_subject(center=(0, 0, 0), size=1.0):
    half = size / 2.0
    c = np.asarray(center, dtype=float)
    return SceneObject(id="subject", label="subject",
                       aabb_min=c - half, aabb_max=c + half)


class TestProjectPoint:
    def test_lookat_projects_to_center(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        u, v, depth = project_point(c, (0, 0, 0))
        assert (u, v) == pytest.approx((0.5, 0.5))
        assert depth == pytest.approx(5.0)

    def test_point_behind_camera_absent(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        assert project_point(c, (0, -10, 0)) is None

    def test_half_fov_offset(self):
        # offset half the horizontal half-FOV tangent at depth 5 -> u = 0.75
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        tan_h = 18.0 / c.f
        u, v, _ = project_point(c, (0.5 * tan_h * 5.0, 0, 0))
        assert u == pytest.approx(0.75)

    def test_degenerate_camera_raises(self):
        with pytest.raises(InvalidCameraError):
            bad = cam(p=(1, 1, 1), l=(1, 1, 1))
            bad.validate()


class TestProjectBox:
    def test_centered_cube(self):
        c = cam(p=(0, 10, 0.0), l=(0, 0, 0))
        box = project_box(c, make_subject())
        assert box.center[0] == pytest.approx(0.5, abs=1e-6)
        assert box.center[1] == pytest.approx(0.5, abs=1e-6)
        assert box.fully_inside

    def test_coverage_decreases_with_distance(self):
        subject = make_subject()
        near = project_box(cam(p=(0, 10, 0), l=(0, 0, 0)), subject)
        far = project_box(cam(p=(0, 20, 0), l=(0, 0, 0)), subject)
        assert far.coverage < near.coverage

    def test_box_behind_camera(self):
        c = cam(p=(0, 10, 0), l=(0, 20, 0))
        box = project_box(c, make_subject())
        assert box.coverage == 0.0
        assert not box.fully_inside

    def test_straddling_near_plane_finite(self):
        # camera inside the box footprint: clip-then-project stays finite
        big = make_subject(size=6.0)
        c = cam(p=(0, 0, 0), l=(0, 5, 0))
        box = project_box(c, big)
        assert box.coverage > 0.0
        assert np.isfinite([box.u_min, box.v_min, box.u_max, box.v_max]).all()

    def test_near_plane_clip_matches_surface_sampling(self):
        # dense surface sampling as an independent oracle for the clipped rect
        big = make_subject(center=(0, 2, 0), size=6.0)
        c = cam(p=(0, 0, 0), l=(0, 5, 0), f=24.0)
        box = project_box(c, big)
        us, vs = [], []
        lo, hi = big.aabb_min, big.aabb_max
        grid = np.linspace(0, 1, 40)
        for axis in range(3):
            for coord in (lo[axis], hi[axis]):
                for ta in grid:
                    for tb in grid:
                        pt = np.empty(3)
                        pt[axis] = coord
                        other = [a for a in range(3) if a != axis]
                        pt[other[0]] = lo[other[0]] + ta * (hi[other[0]] - lo[other[0]])
                        pt[other[1]] = lo[other[1]] + tb * (hi[other[1]] - lo[other[1]])
                        proj = project_point(c, pt)
                        if proj is not None:
                            us.append(proj[0])
                            vs.append(proj[1])
        u0, u1 = max(0.0, min(us)), min(1.0, max(us))
        v0, v1 = max(0.0, min(vs)), min(1.0, max(vs))
        sampled = (u1 - u0) * (v1 - v0)
        assert box.coverage >= sampled - 0.02  # clipping can only widen the bound

    def test_center_agreement_with_point_projection(self):
        subject = make_subject(center=(1, 0, 0.5))
        c = cam(p=(4, 9, 2), l=(1, 0, 0.5))
        box = project_box(c, subject)
        u, v, _ = project_point(c, subject.center)
        assert box.fully_inside
        assert abs(box.center[0] - u) < 0.02
        assert abs(box.center[1] - v) < 0.02


class TestRuleM1:
    def test_centered_no_pref(self):
        signals = rule_m1(cam(p=(0, -5, 0), l=(0, 0, 0)), make_subject())
        assert signals.m1 == 1

    def test_wrong_half(self):
        # subject projected right of center while preference says left
        c = cam(p=(0, -5, 0), l=(-2, 0, 0))
        u, _, _ = project_point(c, (0, 0, 0))
        assert u > 0.5
        assert rule_m1(c, make_subject(), "left").m1 == 0

    def test_behind_camera_off_frame(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        signals = rule_m1(c, make_subject(center=(0, -10, 0)))
        assert signals.m1 == 0
        assert not signals.subject_visible

    def test_exact_half_counts_as_violation(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        u, v, _ = project_point(c, (0, 0, 0))
        assert u == pytest.approx(0.5)
        assert rule_m1(c, make_subject(), "left").m1 == 0
        assert rule_m1(c, make_subject(), "right").m1 == 0


class TestRuleM2:
    def test_on_target(self):
        assert rule_m2(cam(p=(0, -5, 0), l=(0, 0, 0)), make_subject()) == pytest.approx(1.0)

    def test_boundary_distance(self):
        # place the subject center exactly 0.45 screen units from target
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        tan_h = 18.0 / c.f
        x = 0.45 * 2 * tan_h * 5.0
        subject = make_subject(center=(x, 0, 0), size=0.2)
        u, v, _ = project_point(c, subject.center)
        assert np.hypot(u - 0.5, v - 0.5) == pytest.approx(0.45)
        assert rule_m2(c, subject) == pytest.approx(0.0, abs=1e-12)

    def test_linear_midpoint(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        tan_h = 18.0 / c.f
        x = 0.225 * 2 * tan_h * 5.0
        subject = make_subject(center=(x, 0, 0), size=0.2)
        assert rule_m2(c, subject) == pytest.approx(0.5)

    def test_thirds_target(self):
        c = cam(p=(0, -5, 0), l=(0, 0, 0))
        tan_h = 18.0 / c.f
        # subject at the left-thirds point scores 1.0 under the thirds preference
        x = -(0.5 - 1.0 / 3.0) * 2 * tan_h * 5.0
        subject = make_subject(center=(x, 0, 0), size=0.2)
        assert rule_m2(c, subject, "thirds-left") == pytest.approx(1.0)


random_cams = st.tuples(
    st.floats(-20, 20), st.floats(-20, 20), st.floats(-20, 20),
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
    st.floats(20, 100))


@given(random_cams)
@settings(max_examples=200, deadline=None)
def test_m2_bounded_and_formula(args):
    px, py, pz, lx, ly, lz, f = args
    p = np.array([px, py, pz])
    l = np.array([lx, ly, lz])
    if np.linalg.norm(p - l) < 1e-3:
        return
    c = cam(p=p, l=l, f=f)
    subject = make_subject(center=(0, 0, 0), size=0.4)
    value = rule_m2(c, subject)
    assert 0.0 <= value <= 1.0
    proj = project_point(c, subject.center)
    if proj is not None and 0 <= proj[0] <= 1 and 0 <= proj[1] <= 1:
        d = float(np.hypot(proj[0] - 0.5, proj[1] - 0.5))
        assert value == pytest.approx(max(0.0, 1.0 - d / 0.45), abs=1e-9)
    else:
        assert value == 0.0


@given(random_cams)
@settings(max_examples=100, deadline=None)
def test_projective_scale_invariance(args):
    px, py, pz, lx, ly, lz, f = args
    p = np.array([px, py, pz])
    l = np.array([lx, ly, lz])
    if np.linalg.norm(p - l) < 1e-3:
        return
    world = np.array([1.0, 2.0, 0.5])
    a = project_point(cam(p=p, l=l, f=f), world)
    b = project_point(cam(p=3.0 * p, l=3.0 * l, f=f), 3.0 * world)
    if a is None or b is None:
        assert (a is None) == (b is None)
        return
    assert a[0] == pytest.approx(b[0], abs=1e-7)
    assert a[1] == pytest.approx(b[1], abs=1e-7)


class TestHardFailures:
    def test_camera_inside_object(self, walled_scene):
        c = cam(p=(0, 0, 1), l=(5, 0, 1))  # inside the subject box
        assert hard_failure_check(c, walled_scene) == "invalid_camera"

    def test_extreme_occlusion(self, walled_scene):
        spec = type("Spec", (), {"primary_subject": "subject", "angle_pref": None})()
        c = cam(p=(10, 0, 1), l=(0, 0, 1))  # wall fully between camera and subject
        assert hard_failure_check(c, walled_scene, spec) == "extreme_occlusion"

    def test_clear_view_passes(self, walled_scene):
        spec = type("Spec", (), {"primary_subject": "subject", "angle_pref": None})()
        c = cam(p=(-10, 0, 1), l=(0, 0, 1))  # open side
        assert hard_failure_check(c, walled_scene, spec) is None

    def test_subject_missing(self, walled_scene):
        spec = type("Spec", (), {"primary_subject": "subject", "angle_pref": None})()
        c = cam(p=(-10, 0, 1), l=(-20, 0, 1))  # facing away
        assert hard_failure_check(c, walled_scene, spec) == "subject_missing"

    def test_view_type_violation(self, walled_scene):
        spec = type("Spec", (), {"primary_subject": "subject", "angle_pref": "low"})()
        c = cam(p=(0, 0, 30), l=(0, 0.5, 0))  # top-down against a low preference
        assert camera_angle_category(c) == "top"
        assert hard_failure_check(c, walled_scene, spec) == "view_type_violation"
