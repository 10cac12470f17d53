"""Walk through the scene model and the pinhole projection.

Builds a small two-box scene by hand, prints its geometric and topology
summaries, then places a camera and shows where each object lands on
screen together with the rule signals the reviewer derives from that.
"""

from camsearch import (CameraState, SceneModel, SceneObject, geometric_summary,
                       hard_failure_check, project_box, rule_m1, rule_m2,
                       topology_summary)


def main():
    scene = SceneModel(objects=[
        SceneObject(id="statue", label="statue",
                    aabb_min=(-1.0, -1.0, 0.0), aabb_max=(1.0, 1.0, 3.0)),
        SceneObject(id="bench", label="bench",
                    aabb_min=(3.0, -0.5, 0.0), aabb_max=(5.0, 0.5, 0.9)),
    ])

    print("scene scale:", round(scene.scene_scale, 3))
    print("\ngeometric summary (one line per object):")
    for line in geometric_summary(scene):
        print(" ", line)

    topo = topology_summary(scene)
    print("\ntopology: dominant =", topo.dominant_objects[0],
          " structure =", topo.vertical_structure,
          " foreground =", list(topo.foreground_ids))

    # a camera south of the statue, slightly elevated, 50 mm lens
    camera = CameraState(p=(0.0, -9.0, 2.0), l=(0.0, 0.0, 1.5),
                         f=50.0, d=4.0, r=1.5)

    print("\nscreen boxes at", camera.f, "mm:")
    for obj in scene.objects:
        box = project_box(camera, obj)
        if box is None:
            print(f"  {obj.id}: behind the camera")
            continue
        print(f"  {obj.id}: u [{box.u_min:.3f}, {box.u_max:.3f}]"
              f"  v [{box.v_min:.3f}, {box.v_max:.3f}]"
              f"  coverage {box.coverage:.4f}")

    statue = scene.object_by_id("statue")
    print("\nreviewer rule signals for the statue:")
    print("  m1 (framing check): ", rule_m1(camera, statue))
    print("  m2 (center offset): ", round(rule_m2(camera, statue, "center"), 4))
    print("  hard failure:       ", hard_failure_check(camera, scene))

    # the statue center projects to u = 0.5 exactly, and the half-screen
    # boundary counts as a violation when a side is requested
    print("\nplacement_pref='left' with a centered subject:",
          "m1 =", rule_m1(camera, statue, "left").m1)

    # pointing the camera away loses the subject entirely
    away = CameraState(p=(0.0, -9.0, 2.0), l=(0.0, -20.0, 2.0),
                       f=50.0, d=4.0, r=1.5)
    print("looking away from the statue:", rule_m1(away, statue))


if __name__ == "__main__":
    main()
