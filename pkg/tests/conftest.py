import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import splatsim as S


def random_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_asset(rng, n, sh_degree=0, name="asset", spread=2.0,
                 scale_range=(0.05, 0.4)):
    k = (sh_degree + 1) ** 2
    return S.SplatAsset(
        name, sh_degree,
        centers=rng.uniform(-spread, spread, (n, 3)),
        rotations=random_quats(rng, n),
        log_scales=np.log(rng.uniform(*scale_range, (n, 2))),
        opacities=rng.uniform(0.05, 0.95, n),
        sh_coeffs=rng.normal(0.0, 0.3, (n, k, 3)),
    )


def random_pose(rng, max_translation=1.0):
    q = random_quats(rng, 1)[0]
    return S.RigidTransform.from_quat(q, rng.uniform(-max_translation, max_translation, 3))


def random_scene(rng, n_primitives, max_instances=3, max_sh_degree=3):
    n_inst = int(rng.integers(1, max_instances + 1))
    counts = np.full(n_inst, n_primitives // n_inst)
    counts[0] += n_primitives - counts.sum()
    instances = []
    for i, c in enumerate(counts):
        if c == 0:
            continue
        asset = random_asset(rng, int(c), sh_degree=int(rng.integers(0, max_sh_degree + 1)),
                             name=f"asset{i}")
        instances.append(S.AssetInstance(asset, random_pose(rng),
                                         scale=float(rng.uniform(0.5, 2.0))))
    return S.SceneDescription(instances=instances,
                              background_color=tuple(rng.uniform(0, 1, 3)))


def looking_at_origin_pose(distance=8.0):
    """Camera-from-world pose: camera on +z axis looking back at the origin."""
    r = Rotation.from_euler("x", 180, degrees=True).as_matrix()
    cam_pos = np.array([0.0, 0.0, distance])
    return S.RigidTransform(r, -r @ cam_pos)


def wall_asset(width, height, cells_per_meter=10, color=1.0, name="wall"):
    """Solid-color wall splat asset in its local z=0 plane."""
    w_cells = max(2, int(round(width * cells_per_meter)))
    h_cells = max(2, int(round(height * cells_per_meter)))
    img = np.full((h_cells, w_cells), float(color))
    return S.image_to_splat(S.MarkerSpec(image=img, physical_size=width, name=name))


def facing_pose(normal_dir, position):
    """Instance pose orienting an asset's +z normal along normal_dir.

    Keeps the asset's local x axis horizontal so wall width stays horizontal.
    """
    n = np.asarray(normal_dir, dtype=np.float64)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    if abs(n[2]) > 0.999:
        r = np.eye(3) if n[2] > 0 else Rotation.from_euler("x", 180, degrees=True).as_matrix()
    else:
        u = np.cross(z, n)
        u /= np.linalg.norm(u)
        v = np.cross(n, u)
        r = np.column_stack([u, v, n])
    return S.RigidTransform(r, np.asarray(position, dtype=np.float64))


def square_room_scene(wall_distance=3.0, wall_width=6.4, wall_height=3.0,
                      cells_per_meter=10):
    """Opaque square room centered on the origin, walls at +-wall_distance."""
    asset = wall_asset(wall_width, wall_height, cells_per_meter)
    scene = S.SceneDescription(background_color=(0, 0, 0))
    d = wall_distance
    for direction in ([1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]):
        normal = -np.asarray(direction, dtype=float)  # faces the room center
        scene = scene.with_instance(S.AssetInstance(
            asset, facing_pose(normal, np.asarray(direction, dtype=float) * d)))
    return scene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
