from camsearch.blueprint import EvaluationSpec, MissionSpec


def make_mission(scene_ref="scene.json", subject="cube", placement=None,
                 scale=None, angle=None, aspects=(1.5,), category="subject_placement",
                 mission_id="test_mission"):
    return MissionSpec(
        mission_id=mission_id,
        scene_ref=scene_ref,
        instruction="test instruction",
        aspect_set=tuple(aspects),
        eval_spec=EvaluationSpec(primary_subject=subject, placement_pref=placement,
                                 scale_pref=scale, angle_pref=angle),
        category=category,
    )
