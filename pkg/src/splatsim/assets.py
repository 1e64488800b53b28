"""Planar Gaussian splat assets and the transforms applied after training.

A splat is a 2D oriented Gaussian (an ellipse in 3D): a center, a unit
quaternion whose first two rotated basis columns are the in-plane tangent
axes (the third is the surface normal), two log-scale extents, an opacity
in (0, 1), and spherical-harmonic color coefficients.

Assets are immutable; every operation returns a new asset.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform, normalize_quat, quat_multiply, quat_to_matrix

SH_C0 = 0.28209479177387814


@dataclass(frozen=True)
class Primitive2D:
    """A single planar Gaussian splat, in the asset-local frame."""

    center: np.ndarray        # (3,) meters
    rotation: np.ndarray      # (4,) unit quaternion, (w, x, y, z)
    log_scales: np.ndarray    # (2,) log of metric half-extent scales
    opacity: float            # in (0, 1)
    sh_coeffs: np.ndarray     # ((L+1)^2, 3) real-SH color coefficients

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(4))
        object.__setattr__(self, "log_scales", np.asarray(self.log_scales, dtype=np.float64).reshape(2))
        object.__setattr__(self, "sh_coeffs", np.asarray(self.sh_coeffs, dtype=np.float64).reshape(-1, 3))

    @property
    def scales(self) -> np.ndarray:
        """Effective metric scales (s_u, s_v) = exp(log_scales)."""
        return np.exp(self.log_scales)


class SplatAsset:
    """Ordered collection of Primitive2D, stored as flat arrays.

    The array-of-struct view is available through `primitive(i)` /
    iteration; the struct-of-array fields (`centers`, `rotations`, ...)
    are what the rasterizer consumes.
    """

    def __init__(self, name: str, sh_degree: int, centers, rotations, log_scales,
                 opacities, sh_coeffs):
        if not 0 <= int(sh_degree) <= 3:
            raise ValueError(f"sh_degree must be in [0, 3], got {sh_degree}")
        self.name = str(name)
        self.sh_degree = int(sh_degree)
        self.centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
        n = self.centers.shape[0]
        self.rotations = np.ascontiguousarray(rotations, dtype=np.float64).reshape(n, 4)
        self.log_scales = np.ascontiguousarray(log_scales, dtype=np.float64).reshape(n, 2)
        self.opacities = np.ascontiguousarray(opacities, dtype=np.float64).reshape(n)
        k = (self.sh_degree + 1) ** 2
        self.sh_coeffs = np.ascontiguousarray(sh_coeffs, dtype=np.float64).reshape(n, k, 3)
        self._validate()

    def _validate(self):
        for label, arr in (("centers", self.centers), ("rotations", self.rotations),
                           ("log_scales", self.log_scales), ("opacities", self.opacities),
                           ("sh_coeffs", self.sh_coeffs)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite value in {label}")
        norms = np.linalg.norm(self.rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("rotations must be unit quaternions (within 1e-6)")
        if np.any(self.opacities <= 0.0) or np.any(self.opacities >= 1.0):
            raise ValueError("opacities must lie strictly in (0, 1)")

    @classmethod
    def from_primitives(cls, name: str, sh_degree: int, primitives) -> "SplatAsset":
        prims = list(primitives)
        k = (sh_degree + 1) ** 2
        for p in prims:
            if p.sh_coeffs.shape != (k, 3):
                raise ValueError(f"primitive sh_coeffs shape {p.sh_coeffs.shape} "
                                 f"inconsistent with sh_degree {sh_degree}")
        return cls(
            name, sh_degree,
            np.array([p.center for p in prims], dtype=np.float64).reshape(-1, 3),
            np.array([p.rotation for p in prims], dtype=np.float64).reshape(-1, 4),
            np.array([p.log_scales for p in prims], dtype=np.float64).reshape(-1, 2),
            np.array([p.opacity for p in prims], dtype=np.float64).reshape(-1),
            np.array([p.sh_coeffs for p in prims], dtype=np.float64).reshape(-1, k, 3),
        )

    def __len__(self) -> int:
        return self.centers.shape[0]

    def primitive(self, i: int) -> Primitive2D:
        return Primitive2D(self.centers[i], self.rotations[i], self.log_scales[i],
                           float(self.opacities[i]), self.sh_coeffs[i])

    def __iter__(self):
        return (self.primitive(i) for i in range(len(self)))

    @property
    def scales(self) -> np.ndarray:
        """Effective metric scales, (N, 2)."""
        return np.exp(self.log_scales)

    def replace(self, **fields) -> "SplatAsset":
        """New asset with the given arrays substituted."""
        kwargs = dict(name=self.name, sh_degree=self.sh_degree, centers=self.centers,
                      rotations=self.rotations, log_scales=self.log_scales,
                      opacities=self.opacities, sh_coeffs=self.sh_coeffs)
        kwargs.update(fields)
        return SplatAsset(**kwargs)

    def allclose(self, other: "SplatAsset", atol: float = 1e-9) -> bool:
        return (len(self) == len(other)
                and self.sh_degree == other.sh_degree
                and np.allclose(self.centers, other.centers, atol=atol)
                and np.allclose(self.rotations, other.rotations, atol=atol)
                and np.allclose(self.log_scales, other.log_scales, atol=atol)
                and np.allclose(self.opacities, other.opacities, atol=atol)
                and np.allclose(self.sh_coeffs, other.sh_coeffs, atol=atol))


def rescale_asset(asset: SplatAsset, s: float) -> SplatAsset:
    """Uniformly rescale an asset by s > 0.

    Centers become s*p; log-scales shift by log(s). Rotations, opacities
    and SH color are unchanged.
    """
    s = float(s)
    if not np.isfinite(s) or s <= 0.0:
        raise ValueError(f"scale factor must be finite and > 0, got {s}")
    if s == 1.0:
        return asset
    return asset.replace(centers=asset.centers * s,
                         log_scales=asset.log_scales + np.log(s))


def transform_asset(asset: SplatAsset, pose: RigidTransform) -> SplatAsset:
    """Bake a rigid transform into an asset (alignment/cleanup use only).

    Rotating primitives changes how their view-dependent SH color is seen
    from a fixed camera, because the coefficients stay expressed in the
    old frame. Runtime motion should use AssetInstance poses instead; a
    warning is emitted whenever the rotation is not the identity.
    """
    if not np.allclose(pose.rotation, np.eye(3), atol=1e-12):
        warnings.warn(
            "baking a rotation into an asset changes its view-dependent color "
            "as seen from a fixed camera; use AssetInstance poses for motion",
            stacklevel=2,
        )
    q = normalize_quat(pose.quat_wxyz)
    rotations = quat_multiply(q[None, :], asset.rotations)
    return asset.replace(centers=pose.apply(asset.centers), rotations=rotations)


def crop_aabb(asset: SplatAsset, box_min, box_max, keep_inside: bool = True) -> SplatAsset:
    """Keep primitives whose centers fall inside (or outside) an AABB."""
    lo = np.asarray(box_min, dtype=np.float64).reshape(3)
    hi = np.asarray(box_max, dtype=np.float64).reshape(3)
    if np.any(lo > hi):
        raise ValueError("inverted box: min must be <= max component-wise")
    inside = np.all((asset.centers >= lo) & (asset.centers <= hi), axis=1)
    mask = inside if keep_inside else ~inside
    return asset.replace(centers=asset.centers[mask], rotations=asset.rotations[mask],
                         log_scales=asset.log_scales[mask], opacities=asset.opacities[mask],
                         sh_coeffs=asset.sh_coeffs[mask])


def asset_tangent_frames(asset: SplatAsset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-primitive (t_u, t_v, normal) as three (N, 3) arrays."""
    mats = quat_to_matrix(asset.rotations)
    return mats[:, :, 0], mats[:, :, 1], mats[:, :, 2]
