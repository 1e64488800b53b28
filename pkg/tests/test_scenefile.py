import numpy as np
import pytest
from PIL import Image

import splatsim as S
from splatsim.scenefile import SceneFileError, scene_file_from_json, scene_file_to_json
from conftest import random_asset, random_pose


def make_scene_file(rng):
    return S.SceneFile(
        background_color=(0.1, 0.2, 0.3),
        instances=(S.InstanceRecord("room.ply", random_pose(rng), 1.5),
                   S.InstanceRecord("chair.ply")),
        markers=(S.MarkerRecord("tag.png", 0.16, random_pose(rng), "tag36_00"),),
    )


def test_json_roundtrip(rng):
    sf = make_scene_file(rng)
    back = scene_file_from_json(scene_file_to_json(sf))
    assert back.version == S.SCHEMA_VERSION
    assert back.background_color == sf.background_color
    assert len(back.instances) == 2
    for a, b in zip(back.instances, sf.instances):
        assert a.asset_path == b.asset_path
        assert a.scale == b.scale
        assert np.allclose(a.pose.translation, b.pose.translation, atol=1e-12)
        assert np.allclose(a.pose.rotation, b.pose.rotation, atol=1e-12)
    m, n = back.markers[0], sf.markers[0]
    assert (m.image_path, m.physical_size, m.marker_id) == (n.image_path, n.physical_size, n.marker_id)
    assert np.allclose(m.pose.rotation, n.pose.rotation, atol=1e-12)


def test_defaults_fill_in():
    sf = scene_file_from_json('{"version": 1}')
    assert sf.instances == () and sf.markers == ()
    assert sf.background_color == (0.0, 0.0, 0.0)
    sf2 = scene_file_from_json(
        '{"version": 1, "instances": [{"asset": "a.ply",'
        ' "pose": {"translation": [0,0,0], "quaternion_wxyz": [1,0,0,0]}}]}')
    assert sf2.instances[0].scale == 1.0


def test_version_mismatch_rejected():
    with pytest.raises(SceneFileError, match="version"):
        scene_file_from_json('{"version": 99}')
    with pytest.raises(SceneFileError, match="version"):
        scene_file_from_json('{}')


def test_invalid_json_rejected():
    with pytest.raises(SceneFileError, match="JSON"):
        scene_file_from_json("not json {")


def test_bad_pose_rejected():
    with pytest.raises(SceneFileError, match="pose"):
        scene_file_from_json(
            '{"version": 1, "instances": [{"asset": "a.ply", "pose": {"translation": [0,0,0]}}]}')


def test_save_load_checks_references(tmp_path, rng):
    sf = S.SceneFile(instances=(S.InstanceRecord("room.ply"),))
    path = tmp_path / "scene.json"
    S.save_scene_file(sf, path)
    with pytest.raises(SceneFileError, match="room.ply"):
        S.load_scene_file(path)
    (tmp_path / "room.ply").write_bytes(S.save_ply(random_asset(rng, 10)))
    assert len(S.load_scene_file(path).instances) == 1


def test_load_scene_materializes_assets_and_markers(tmp_path, rng):
    asset = random_asset(rng, 25, sh_degree=1)
    (tmp_path / "room.ply").write_bytes(S.save_ply(asset))
    img = (rng.uniform(size=(8, 8)) > 0.5).astype(np.uint8) * 255
    Image.fromarray(img, mode="L").save(tmp_path / "tag.png")
    sf = S.SceneFile(
        background_color=(0.5, 0.5, 0.5),
        instances=(S.InstanceRecord("room.ply", random_pose(rng), 2.0),),
        markers=(S.MarkerRecord("tag.png", 0.16, random_pose(rng), "tag0"),),
    )
    S.save_scene_file(sf, tmp_path / "scene.json")
    scene = S.load_scene(tmp_path / "scene.json")
    assert scene.background_color == (0.5, 0.5, 0.5)
    assert len(scene.instances) == 2
    assert scene.instances[0].asset.allclose(asset, atol=1e-6)
    assert scene.instances[0].scale == 2.0
    assert len(scene.instances[1].asset) == 64
    assert scene.markers[0].marker_id == "tag0"
    assert scene.markers[0].physical_size == 0.16


def test_marker_image_loaded_as_binary(tmp_path, rng):
    img = np.zeros((4, 4), dtype=np.uint8)
    img[0, 0] = 255
    Image.fromarray(img, mode="L").save(tmp_path / "tag.png")
    sf = S.SceneFile(markers=(S.MarkerRecord("tag.png", 0.1),))
    S.save_scene_file(sf, tmp_path / "scene.json")
    scene = S.load_scene(tmp_path / "scene.json")
    colors = S.eval_sh(scene.instances[0].asset.sh_coeffs, np.array([0.0, 0.0, 1.0]))
    assert np.allclose(colors[0], 1.0)
    assert np.allclose(colors[1:], 0.0)
