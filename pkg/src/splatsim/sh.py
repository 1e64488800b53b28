"""Real spherical-harmonic color evaluation, degrees 0..3.

Uses the band constants common to stock splatting pipelines; the decoded
color is clamp(sh_expansion + 0.5, 0, 1) per channel.
"""
from __future__ import annotations

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


def eval_sh(sh_coeffs: np.ndarray, view_dir: np.ndarray) -> np.ndarray:
    """Decode view-dependent RGB from SH coefficients.

    sh_coeffs: (..., K, 3) with K = (L+1)^2, L in 0..3.
    view_dir:  (..., 3) unit direction(s), broadcastable against sh_coeffs.
    Returns (..., 3) RGB in [0, 1].
    """
    sh = np.asarray(sh_coeffs, dtype=np.float64)
    d = np.asarray(view_dir, dtype=np.float64)
    k = sh.shape[-2]
    degree = int(round(np.sqrt(k))) - 1
    if (degree + 1) ** 2 != k or not 0 <= degree <= 3:
        raise ValueError(f"bad SH coefficient count {k}; need (L+1)^2 with L in 0..3")
    norms = np.linalg.norm(d, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("view direction must be nonzero")
    d = d / norms

    out = SH_C0 * sh[..., 0, :]
    if degree >= 1:
        x, y, z = d[..., 0:1], d[..., 1:2], d[..., 2:3]
        out = (out - SH_C1 * y * sh[..., 1, :]
               + SH_C1 * z * sh[..., 2, :]
               - SH_C1 * x * sh[..., 3, :])
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out = (out
               + SH_C2[0] * xy * sh[..., 4, :]
               + SH_C2[1] * yz * sh[..., 5, :]
               + SH_C2[2] * (2.0 * zz - xx - yy) * sh[..., 6, :]
               + SH_C2[3] * xz * sh[..., 7, :]
               + SH_C2[4] * (xx - yy) * sh[..., 8, :])
    if degree >= 3:
        out = (out
               + SH_C3[0] * y * (3.0 * xx - yy) * sh[..., 9, :]
               + SH_C3[1] * xy * z * sh[..., 10, :]
               + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[..., 11, :]
               + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[..., 12, :]
               + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[..., 13, :]
               + SH_C3[5] * z * (xx - yy) * sh[..., 14, :]
               + SH_C3[6] * x * (xx - yy) * sh[..., 15, :])
    return np.clip(out + 0.5, 0.0, 1.0)
