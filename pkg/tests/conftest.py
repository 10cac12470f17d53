import pytest

from camsearch.scene import SceneModel, SceneObject

from helpers import make_mission


@pytest.fixture
def unit_cube_scene():
    return SceneModel(objects=(
        SceneObject(id="cube", label="cube",
                    aabb_min=(-0.5, -0.5, -0.5), aabb_max=(0.5, 0.5, 0.5)),
    ))


@pytest.fixture
def two_cube_scene():
    return SceneModel(objects=(
        SceneObject(id="a", label="cube", aabb_min=(-0.5, -0.5, -0.5),
                    aabb_max=(0.5, 0.5, 0.5)),
        SceneObject(id="b", label="cube", aabb_min=(8.5, -0.5, -0.5),
                    aabb_max=(9.5, 0.5, 0.5)),
    ))


@pytest.fixture
def walled_scene():
    # subject boxed in by a large wall directly between it and +X viewpoints
    return SceneModel(objects=(
        SceneObject(id="subject", label="statue",
                    aabb_min=(-1.0, -1.0, 0.0), aabb_max=(1.0, 1.0, 2.0)),
        SceneObject(id="wall", label="wall",
                    aabb_min=(2.0, -10.0, -1.0), aabb_max=(2.5, 10.0, 10.0)),
    ))


@pytest.fixture
def simple_mission():
    return make_mission()
