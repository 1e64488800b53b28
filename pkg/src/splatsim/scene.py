"""Scene composition: instanced splat assets with rigid pose + uniform scale.

View-dependent color is always evaluated in the asset-local frame (the
view direction is mapped through the inverse instance rotation), so
moving an instance rigidly never changes its appearance from a co-moving
camera.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .assets import SplatAsset, asset_tangent_frames
from .geometry import RigidTransform
from .sh import eval_sh


@dataclass(frozen=True)
class AssetInstance:
    asset: SplatAsset
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise ValueError(f"instance scale must be finite and > 0, got {self.scale}")


@dataclass(frozen=True)
class MarkerGroundTruth:
    """Where a fiducial marker was placed, kept for evaluation."""

    marker_id: str
    pose: RigidTransform
    physical_size: float


@dataclass(frozen=True)
class SceneDescription:
    instances: tuple = ()
    background_color: tuple = (0.0, 0.0, 0.0)
    markers: tuple = ()

    def __post_init__(self):
        bg = np.asarray(self.background_color, dtype=np.float64).reshape(3)
        if np.any(bg < 0.0) or np.any(bg > 1.0):
            raise ValueError("background color must lie in [0,1]^3")
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "background_color", tuple(float(c) for c in bg))
        object.__setattr__(self, "markers", tuple(self.markers))
        # world convention is z-up; an instance whose +z maps below the
        # horizon is suspicious but legal (e.g. wall-mounted markers)
        for i, inst in enumerate(self.instances):
            if inst.pose.rotation[2, 2] < -0.999:
                warnings.warn(f"instance {i} is oriented upside-down relative to the "
                              "z-up world convention", stacklevel=2)

    def with_instance(self, instance: AssetInstance) -> "SceneDescription":
        return replace(self, instances=self.instances + (instance,))

    @property
    def primitive_count(self) -> int:
        return sum(len(inst.asset) for inst in self.instances)


class FlatScene:
    """World-frame splat arrays ready for the rasterizer."""

    def __init__(self, scene: SceneDescription):
        n = scene.primitive_count
        kmax = max(((inst.asset.sh_degree + 1) ** 2 for inst in scene.instances), default=1)
        self.centers = np.empty((n, 3))
        self.tu = np.empty((n, 3))
        self.tv = np.empty((n, 3))
        self.normals = np.empty((n, 3))
        self.su = np.empty(n)
        self.sv = np.empty(n)
        self.alphas = np.empty(n)
        self.sh = np.zeros((n, kmax, 3))
        self.inst_index = np.empty(n, dtype=np.int64)
        self.inst_rot = np.empty((len(scene.instances), 3, 3))
        self.background = np.asarray(scene.background_color, dtype=np.float64)

        at = 0
        for i, inst in enumerate(scene.instances):
            asset = inst.asset
            m = len(asset)
            r, t, s = inst.pose.rotation, inst.pose.translation, inst.scale
            self.inst_rot[i] = r
            sl = slice(at, at + m)
            self.centers[sl] = (asset.centers * s) @ r.T + t
            tu, tv, nrm = asset_tangent_frames(asset)
            self.tu[sl] = tu @ r.T
            self.tv[sl] = tv @ r.T
            self.normals[sl] = nrm @ r.T
            scales = asset.scales * s
            self.su[sl] = scales[:, 0]
            self.sv[sl] = scales[:, 1]
            self.alphas[sl] = asset.opacities
            self.sh[sl, : (asset.sh_degree + 1) ** 2, :] = asset.sh_coeffs
            self.inst_index[sl] = i
            at += m

    def __len__(self) -> int:
        return self.centers.shape[0]

    def splat_colors(self, camera_position: np.ndarray) -> np.ndarray:
        """Per-splat RGB for a camera at the given world position.

        The view direction from the camera to each splat center is mapped
        into the owning instance's asset-local frame before SH decoding.
        """
        if len(self) == 0:
            return np.zeros((0, 3))
        dirs = self.centers - np.asarray(camera_position, dtype=np.float64).reshape(3)
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.where(norms > 1e-12, dirs / np.maximum(norms, 1e-12),
                        np.array([0.0, 0.0, 1.0]))
        rots = self.inst_rot[self.inst_index]
        local = np.einsum("nji,nj->ni", rots, dirs)
        return eval_sh(self.sh, local)


def flatten_scene(scene: SceneDescription) -> FlatScene:
    return FlatScene(scene)
