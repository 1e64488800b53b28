"""Software rasterizer for planar Gaussian splat scenes.

Two paths with one contract:
  - `render`: tile-binned, conservatively culled, fast;
  - `reference_render`: exhaustive per-pixel iteration over every splat,
    used as the independent oracle in tests (intended for small scenes,
    but functional at any size).

Per pixel, intersected splats are sorted front-to-back by exact hit
z-depth (ties broken by splat index) and composited as

    C = sum_k c_k a'_k prod_{j<k} (1 - a'_j),  a'_k = alpha_k * g_k,

with remaining transmittance multiplying the background color. Depth is
the alpha-weighted mean hit depth, reported as 0 (invalid) where the
accumulated weight stays below `depth_alpha_min`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import CameraPose, Intrinsics
from .geometry import quat_to_matrix
from .scene import FlatScene, SceneDescription, flatten_scene


@dataclass(frozen=True)
class RenderSettings:
    alpha_cutoff: float = 1.0 / 255.0
    transmittance_floor: float = 1e-4
    gaussian_support: float = 3.0
    depth_alpha_min: float = 0.5
    tile_size: int = 16

    def __post_init__(self):
        for label, value in (("alpha_cutoff", self.alpha_cutoff),
                             ("transmittance_floor", self.transmittance_floor),
                             ("depth_alpha_min", self.depth_alpha_min)):
            if not (math.isfinite(value) and 0.0 < value <= 1.0):
                raise ValueError(f"{label} must lie in (0, 1], got {value}")
        if not 1.0 <= self.gaussian_support <= 6.0:
            raise ValueError(f"gaussian_support must lie in [1, 6], got {self.gaussian_support}")
        if self.tile_size < 4:
            raise ValueError(f"tile_size must be >= 4, got {self.tile_size}")


@dataclass(frozen=True)
class RenderedFrame:
    rgb: np.ndarray    # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) z-depth in meters, 0 = invalid
    alpha: np.ndarray  # (H, W) accumulated opacity in [0, 1]


def intersect_splat(ray_origin, ray_dir, center, rotation_wxyz, scales,
                    support: float = 3.0):
    """Intersect one ray with one splat; returns (g, t) or None on miss.

    `t` is the hit distance along the (unit) ray direction. Misses: plane
    parallel to the ray, hit behind the origin, or hit outside
    support * (s_u, s_v) along the local axes.
    """
    o = np.asarray(ray_origin, dtype=np.float64).reshape(3)
    d = np.asarray(ray_dir, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("ray direction must be normalized")
    c = np.asarray(center, dtype=np.float64).reshape(3)
    m = quat_to_matrix(np.asarray(rotation_wxyz, dtype=np.float64))
    t_u, t_v, n = m[:, 0], m[:, 1], m[:, 2]
    s_u, s_v = (float(s) for s in np.asarray(scales, dtype=np.float64).reshape(2))

    denom = float(n @ d)
    if abs(denom) < 1e-9:
        return None
    t = float(n @ (c - o)) / denom
    if t <= 0.0:
        return None
    local = o + t * d - c
    lu, lv = float(local @ t_u), float(local @ t_v)
    if abs(lu) > support * s_u or abs(lv) > support * s_v:
        return None
    g = math.exp(-0.5 * ((lu / s_u) ** 2 + (lv / s_v) ** 2))
    return g, t


def _to_camera_frame(flat: FlatScene, pose: CameraPose):
    r, t = pose.rotation, pose.translation
    return (flat.centers @ r.T + t, flat.tu @ r.T, flat.tv @ r.T, flat.normals @ r.T)


def _cull_tiles(centers, tu, tv, su, sv, support, intr: Intrinsics, tile_size: int):
    """Conservative per-splat tile ranges from projected support-rect corners.

    Splats fully behind the camera get an empty range; splats straddling
    the camera plane get the full image (rare, still correct).
    """
    n = centers.shape[0]
    eu = (support * su)[:, None] * tu
    ev = (support * sv)[:, None] * tv
    corners = np.stack([centers + eu + ev, centers + eu - ev,
                        centers - eu + ev, centers - eu - ev], axis=1)  # (N,4,3)
    z = corners[:, :, 2]
    eps = 1e-9
    behind_all = np.all(z <= eps, axis=1)
    behind_any = np.any(z <= eps, axis=1)

    zs = np.maximum(z, eps)
    us = intr.fx * corners[:, :, 0] / zs + intr.cx
    vs = intr.fy * corners[:, :, 1] / zs + intr.cy
    margin = 1e-3  # float slack; culling must stay conservative
    u0 = np.floor(us.min(axis=1) - margin)
    u1 = np.ceil(us.max(axis=1) + margin)
    v0 = np.floor(vs.min(axis=1) - margin)
    v1 = np.ceil(vs.max(axis=1) + margin)

    straddle = behind_any & ~behind_all
    u0[straddle], u1[straddle] = 0.0, intr.width - 1.0
    v0[straddle], v1[straddle] = 0.0, intr.height - 1.0

    u0 = np.clip(u0, 0, intr.width - 1)
    u1 = np.clip(u1, 0, intr.width - 1)
    v0 = np.clip(v0, 0, intr.height - 1)
    v1 = np.clip(v1, 0, intr.height - 1)

    off_screen = (behind_all
                  | (np.ceil(us.max(axis=1) + margin) < 0)
                  | (np.floor(us.min(axis=1) - margin) > intr.width - 1)
                  | (np.ceil(vs.max(axis=1) + margin) < 0)
                  | (np.floor(vs.min(axis=1) - margin) > intr.height - 1))
    off_screen = off_screen & ~straddle

    tx0 = (u0 // tile_size).astype(np.int64)
    tx1 = (u1 // tile_size).astype(np.int64)
    ty0 = (v0 // tile_size).astype(np.int64)
    ty1 = (v1 // tile_size).astype(np.int64)
    tx1[off_screen] = -1  # empty range
    tx0[off_screen] = 0
    return tx0, tx1, ty0, ty1


def _prepare(scene: SceneDescription, pose: CameraPose, intr: Intrinsics,
             settings: RenderSettings):
    flat = flatten_scene(scene)
    cam_position = pose.inverse().translation
    colors = flat.splat_colors(cam_position)
    centers, tu, tv, normals = _to_camera_frame(flat, pose)
    return flat, colors, centers, tu, tv, normals


def _alloc(intr: Intrinsics):
    rgb = np.empty((intr.height, intr.width, 3))
    depth = np.empty((intr.height, intr.width))
    alpha = np.empty((intr.height, intr.width))
    return rgb, depth, alpha


def render(scene: SceneDescription, pose: CameraPose, intr: Intrinsics,
           settings: RenderSettings | None = None) -> RenderedFrame:
    """Tile-binned render of a scene; deterministic for fixed inputs."""
    settings = settings or RenderSettings()
    flat, colors, centers, tu, tv, normals = _prepare(scene, pose, intr, settings)
    rgb, depth, alpha = _alloc(intr)
    n_tiles_x = (intr.width + settings.tile_size - 1) // settings.tile_size
    n_tiles_y = (intr.height + settings.tile_size - 1) // settings.tile_size
    tx0, tx1, ty0, ty1 = _cull_tiles(centers, tu, tv, flat.su, flat.sv,
                                     settings.gaussian_support, intr, settings.tile_size)
    offsets, ids = _kernels.bin_splats(tx0, tx1, ty0, ty1, n_tiles_x, n_tiles_y)
    _kernels.render_binned(centers, tu, tv, normals, flat.su, flat.sv, flat.alphas,
                           colors, intr.fx, intr.fy, intr.cx, intr.cy,
                           intr.width, intr.height, settings.tile_size,
                           n_tiles_x, n_tiles_y, offsets, ids,
                           settings.alpha_cutoff, settings.transmittance_floor,
                           settings.gaussian_support, settings.depth_alpha_min,
                           flat.background, rgb, depth, alpha)
    return RenderedFrame(rgb=rgb, depth=depth, alpha=alpha)


def reference_render(scene: SceneDescription, pose: CameraPose, intr: Intrinsics,
                     settings: RenderSettings | None = None) -> RenderedFrame:
    """Brute-force render: every splat tested at every pixel, full sort."""
    settings = settings or RenderSettings()
    flat, colors, centers, tu, tv, normals = _prepare(scene, pose, intr, settings)
    rgb, depth, alpha = _alloc(intr)
    _kernels.render_brute(centers, tu, tv, normals, flat.su, flat.sv, flat.alphas,
                          colors, intr.fx, intr.fy, intr.cx, intr.cy,
                          intr.width, intr.height,
                          settings.alpha_cutoff, settings.transmittance_floor,
                          settings.gaussian_support, settings.depth_alpha_min,
                          flat.background, rgb, depth, alpha)
    return RenderedFrame(rgb=rgb, depth=depth, alpha=alpha)
