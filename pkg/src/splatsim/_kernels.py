"""Numba kernels for the software rasterizer.

Both kernels consume camera-frame splat arrays (centers, tangent axes,
normal, metric scales) plus precomputed per-splat RGB, and write rgb /
depth / alpha buffers in place. Pixel rays are unnormalized with z = 1,
so the ray parameter of a hit *is* its z-depth.

`render_binned` walks tile bins produced by `bin_splats`; `render_brute`
tests every splat at every pixel. Blending order is identical in both:
stable sort by hit depth (ties fall back to splat index because hits are
collected in index order), front-to-back compositing with an alpha
cutoff and a transmittance floor.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def bin_splats(tx0, tx1, ty0, ty1, n_tiles_x, n_tiles_y):
    """CSR-style tile bins; splat indices within each bin are ascending."""
    n_tiles = n_tiles_x * n_tiles_y
    counts = np.zeros(n_tiles + 1, dtype=np.int64)
    n = tx0.shape[0]
    for k in range(n):
        if tx1[k] < tx0[k] or ty1[k] < ty0[k]:
            continue
        for ty in range(ty0[k], ty1[k] + 1):
            for tx in range(tx0[k], tx1[k] + 1):
                counts[ty * n_tiles_x + tx + 1] += 1
    offsets = np.cumsum(counts)
    ids = np.empty(offsets[n_tiles], dtype=np.int64)
    cursor = offsets[:n_tiles].copy()
    for k in range(n):
        if tx1[k] < tx0[k] or ty1[k] < ty0[k]:
            continue
        for ty in range(ty0[k], ty1[k] + 1):
            for tx in range(tx0[k], tx1[k] + 1):
                t = ty * n_tiles_x + tx
                ids[cursor[t]] = k
                cursor[t] += 1
    return offsets, ids


@njit(cache=True, inline="always")
def _intersect(k, dirx, diry, dir_norm, centers, tu, tv, normals, su, sv, support):
    """Ray-splat hit for pixel ray (dirx, diry, 1); returns (g, zdepth) or (-1, -1)."""
    ndd = normals[k, 0] * dirx + normals[k, 1] * diry + normals[k, 2]
    if abs(ndd) < 1e-9 * dir_norm:
        return -1.0, -1.0
    num = (normals[k, 0] * centers[k, 0] + normals[k, 1] * centers[k, 1]
           + normals[k, 2] * centers[k, 2])
    t = num / ndd
    if t <= 0.0:
        return -1.0, -1.0
    hx = t * dirx - centers[k, 0]
    hy = t * diry - centers[k, 1]
    hz = t - centers[k, 2]
    lu = hx * tu[k, 0] + hy * tu[k, 1] + hz * tu[k, 2]
    lv = hx * tv[k, 0] + hy * tv[k, 1] + hz * tv[k, 2]
    if abs(lu) > support * su[k] or abs(lv) > support * sv[k]:
        return -1.0, -1.0
    ru = lu / su[k]
    rv = lv / sv[k]
    g = math.exp(-0.5 * (ru * ru + rv * rv))
    return g, t


@njit(cache=True, inline="always")
def _blend(n_hits, hit_t, hit_a, hit_id, colors, bg, t_floor, depth_alpha_min,
           rgb, depth, alpha, v, u):
    order = np.argsort(hit_t[:n_hits], kind="mergesort")
    trans = 1.0
    cr = 0.0
    cg = 0.0
    cb = 0.0
    depth_num = 0.0
    w_sum = 0.0
    for i in range(n_hits):
        j = order[i]
        a = hit_a[j]
        w = a * trans
        k = hit_id[j]
        cr += colors[k, 0] * w
        cg += colors[k, 1] * w
        cb += colors[k, 2] * w
        depth_num += hit_t[j] * w
        w_sum += w
        trans *= 1.0 - a
        if trans < t_floor:
            break
    rgb[v, u, 0] = cr + trans * bg[0]
    rgb[v, u, 1] = cg + trans * bg[1]
    rgb[v, u, 2] = cb + trans * bg[2]
    alpha[v, u] = w_sum
    depth[v, u] = depth_num / w_sum if w_sum >= depth_alpha_min else 0.0


@njit(cache=True)
def render_binned(centers, tu, tv, normals, su, sv, alphas, colors,
                  fx, fy, cx, cy, width, height, tile_size,
                  n_tiles_x, n_tiles_y, offsets, ids,
                  alpha_cutoff, t_floor, support, depth_alpha_min, bg,
                  rgb, depth, alpha):
    max_bin = 0
    for t in range(n_tiles_x * n_tiles_y):
        c = offsets[t + 1] - offsets[t]
        if c > max_bin:
            max_bin = c
    hit_t = np.empty(max_bin, dtype=np.float64)
    hit_a = np.empty(max_bin, dtype=np.float64)
    hit_id = np.empty(max_bin, dtype=np.int64)

    for ty in range(n_tiles_y):
        v_end = min((ty + 1) * tile_size, height)
        for tx in range(n_tiles_x):
            u_end = min((tx + 1) * tile_size, width)
            t = ty * n_tiles_x + tx
            b0 = offsets[t]
            b1 = offsets[t + 1]
            for v in range(ty * tile_size, v_end):
                diry = (v - cy) / fy
                for u in range(tx * tile_size, u_end):
                    dirx = (u - cx) / fx
                    dir_norm = math.sqrt(dirx * dirx + diry * diry + 1.0)
                    n_hits = 0
                    for bi in range(b0, b1):
                        k = ids[bi]
                        g, zd = _intersect(k, dirx, diry, dir_norm, centers,
                                           tu, tv, normals, su, sv, support)
                        if g < 0.0:
                            continue
                        a = alphas[k] * g
                        if a < alpha_cutoff:
                            continue
                        hit_t[n_hits] = zd
                        hit_a[n_hits] = a
                        hit_id[n_hits] = k
                        n_hits += 1
                    _blend(n_hits, hit_t, hit_a, hit_id, colors, bg, t_floor,
                           depth_alpha_min, rgb, depth, alpha, v, u)


@njit(cache=True)
def render_brute(centers, tu, tv, normals, su, sv, alphas, colors,
                 fx, fy, cx, cy, width, height,
                 alpha_cutoff, t_floor, support, depth_alpha_min, bg,
                 rgb, depth, alpha):
    # Reference path: deliberately self-contained (no shared intersection
    # or blending helpers) so it can serve as an independent oracle for
    # the binned path.
    n = centers.shape[0]
    hit_t = np.empty(max(n, 1), dtype=np.float64)
    hit_a = np.empty(max(n, 1), dtype=np.float64)
    hit_id = np.empty(max(n, 1), dtype=np.int64)
    for v in range(height):
        diry = (v - cy) / fy
        for u in range(width):
            dirx = (u - cx) / fx
            dir_norm = math.sqrt(dirx * dirx + diry * diry + 1.0)
            n_hits = 0
            for k in range(n):
                ndd = normals[k, 0] * dirx + normals[k, 1] * diry + normals[k, 2]
                if abs(ndd) < 1e-9 * dir_norm:
                    continue
                num = (normals[k, 0] * centers[k, 0] + normals[k, 1] * centers[k, 1]
                       + normals[k, 2] * centers[k, 2])
                t = num / ndd
                if t <= 0.0:
                    continue
                hx = t * dirx - centers[k, 0]
                hy = t * diry - centers[k, 1]
                hz = t - centers[k, 2]
                lu = hx * tu[k, 0] + hy * tu[k, 1] + hz * tu[k, 2]
                lv = hx * tv[k, 0] + hy * tv[k, 1] + hz * tv[k, 2]
                if abs(lu) > support * su[k] or abs(lv) > support * sv[k]:
                    continue
                ru = lu / su[k]
                rv = lv / sv[k]
                a = alphas[k] * math.exp(-0.5 * (ru * ru + rv * rv))
                if a < alpha_cutoff:
                    continue
                hit_t[n_hits] = t
                hit_a[n_hits] = a
                hit_id[n_hits] = k
                n_hits += 1
            order = np.argsort(hit_t[:n_hits], kind="mergesort")
            trans = 1.0
            cr = 0.0
            cg = 0.0
            cb = 0.0
            depth_num = 0.0
            w_sum = 0.0
            for i in range(n_hits):
                j = order[i]
                a = hit_a[j]
                w = a * trans
                k = hit_id[j]
                cr += colors[k, 0] * w
                cg += colors[k, 1] * w
                cb += colors[k, 2] * w
                depth_num += hit_t[j] * w
                w_sum += w
                trans *= 1.0 - a
                if trans < t_floor:
                    break
            rgb[v, u, 0] = cr + trans * bg[0]
            rgb[v, u, 1] = cg + trans * bg[1]
            rgb[v, u, 2] = cb + trans * bg[2]
            alpha[v, u] = w_sum
            depth[v, u] = depth_num / w_sum if w_sum >= depth_alpha_min else 0.0
