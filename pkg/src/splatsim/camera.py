"""Pinhole camera model: intrinsics, optical-frame poses, (back-)projection.

Conventions used everywhere in the package:
  - optical frame: +z forward, +x right, +y down;
  - integer pixel coordinates index ray centers directly (no half-pixel
    shift at projection time); `intrinsics_from_hfov` bakes the 0.5 pixel
    offset into the principal point instead;
  - depth is z-depth (distance along the optical axis), not ray length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)
                and self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be finite and > 0")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


# A camera pose is the camera-from-world rigid transform: x_cam = R x_world + t.
CameraPose = RigidTransform


def intrinsics_from_hfov(hfov: float, width: int, height: int) -> Intrinsics:
    """Square-pixel intrinsics for a given horizontal field of view (radians)."""
    if not (0.0 < hfov < math.pi) or not math.isfinite(hfov):
        raise ValueError(f"hfov must lie in (0, pi), got {hfov}")
    f = (width / 2.0) / math.tan(hfov / 2.0)
    return Intrinsics(fx=f, fy=f, cx=width / 2.0 - 0.5, cy=height / 2.0 - 0.5,
                      width=width, height=height)


def back_project(intr: Intrinsics, u: float, v: float, d: float) -> np.ndarray:
    """Pixel (u, v) at z-depth d -> camera-frame point."""
    if not (d > 0.0 and math.isfinite(d)):
        raise ValueError(f"depth must be finite and > 0, got {d}")
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise ValueError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height} image")
    return np.array([(u - intr.cx) / intr.fx * d,
                     (v - intr.cy) / intr.fy * d,
                     d])


def project(intr: Intrinsics, p) -> tuple[float, float, float] | None:
    """Camera-frame point -> (u, v, z-depth), or None when out of frame.

    Points at or behind the camera plane (z <= 0) raise ValueError.
    """
    x, y, z = (float(c) for c in np.asarray(p, dtype=np.float64).reshape(3))
    if z <= 0.0:
        raise ValueError(f"point is behind the camera (z={z})")
    u = intr.fx * x / z + intr.cx
    v = intr.fy * y / z + intr.cy
    if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
        return None
    return u, v, z


def pixel_rays(intr: Intrinsics) -> np.ndarray:
    """Unnormalized camera-frame ray directions, (H, W, 3), z component 1."""
    u = (np.arange(intr.width) - intr.cx) / intr.fx
    v = (np.arange(intr.height) - intr.cy) / intr.fy
    dirs = np.empty((intr.height, intr.width, 3))
    dirs[..., 0] = u[None, :]
    dirs[..., 1] = v[:, None]
    dirs[..., 2] = 1.0
    return dirs


def depth_to_points(depth: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Back-project a full depth map; invalid (zero) pixels yield (0,0,0)."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (intr.height, intr.width):
        raise ValueError(f"depth shape {depth.shape} does not match intrinsics "
                         f"{intr.height}x{intr.width}")
    return pixel_rays(intr) * depth[..., None]


def validate_depth_map(depth: np.ndarray) -> np.ndarray:
    """Check the depth-map contract: finite, non-negative; 0 means invalid."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError("depth map must be 2-D")
    if not np.all(np.isfinite(depth)) or np.any(depth < 0.0):
        raise ValueError("depth map must be finite and non-negative")
    return depth
