"""Fiducial markers and flat textured surfaces as splat assets.

An image becomes a grid of planar Gaussians on the z=0 plane of the
asset frame, one per pixel cell, with degree-0 SH color. The same
construction builds floors and walls from solid-color images.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assets import SH_C0, SplatAsset
from .geometry import RigidTransform
from .scene import AssetInstance, MarkerGroundTruth, SceneDescription


@dataclass(frozen=True)
class MarkerSpec:
    image: np.ndarray          # (H, W) or (H, W, 3), values in [0, 1]
    physical_size: float       # printed width, meters
    sigma_ratio: float = 0.5   # Gaussian sigma as a fraction of cell pitch
    opacity: float = 1.0 - 1e-4
    name: str = "marker"

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        if img.ndim != 3 or img.shape[2] != 3 or img.size == 0:
            raise ValueError("image must be a non-empty HxW or HxWx3 array")
        if np.any(img < 0.0) or np.any(img > 1.0) or not np.all(np.isfinite(img)):
            raise ValueError("image values must lie in [0, 1]")
        if not self.physical_size > 0.0:
            raise ValueError("physical_size must be > 0")
        if not 0.0 < self.sigma_ratio <= 1.0:
            raise ValueError("sigma_ratio must lie in (0, 1]")
        if not 0.0 < self.opacity < 1.0:
            raise ValueError("opacity must lie in (0, 1)")
        object.__setattr__(self, "image", img)


def image_to_splat(spec: MarkerSpec) -> SplatAsset:
    """One splat per pixel cell, row-major, normal +z, isotropic color.

    Cell pitch is physical_size / W; sigma is sigma_ratio * pitch on both
    local axes, so adjacent cells overlap at about one sigma.
    """
    h, w = spec.image.shape[:2]
    pitch = spec.physical_size / w
    cols = (np.arange(w) + 0.5) * pitch - spec.physical_size / 2.0
    rows = (h / 2.0 - (np.arange(h) + 0.5)) * pitch  # image top maps to +y
    xs, ys = np.meshgrid(cols, rows)
    n = h * w
    centers = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(n)])
    rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))  # t_u=+x, t_v=+y, normal=+z
    log_scales = np.full((n, 2), np.log(spec.sigma_ratio * pitch))
    opacities = np.full(n, spec.opacity)
    sh = ((spec.image.reshape(n, 3) - 0.5) / SH_C0)[:, None, :]
    return SplatAsset(spec.name, 0, centers, rotations, log_scales, opacities, sh)


def place_marker(scene: SceneDescription, asset: SplatAsset, pose: RigidTransform,
                 physical_size: float, size_override: float | None = None,
                 marker_id: str | None = None) -> SceneDescription:
    """Append a marker instance and record its ground-truth pose."""
    if size_override is not None and not size_override > 0.0:
        raise ValueError("size_override must be > 0")
    scale = 1.0 if size_override is None else size_override / physical_size
    gt = MarkerGroundTruth(marker_id=marker_id or asset.name, pose=pose,
                           physical_size=size_override or physical_size)
    return replace(scene,
                   instances=scene.instances + (AssetInstance(asset, pose, scale),),
                   markers=scene.markers + (gt,))
