"""Binary PLY interchange for splat assets.

The on-disk layout follows the de-facto Gaussian-splat convention: one
`vertex` element with little-endian float32 properties

    x, y, z, f_dc_0..2, f_rest_0..(3(L+1)^2 - 4),
    opacity (pre-sigmoid logit), scale_0, scale_1, rot_0..3

f_rest is channel-major (all higher-band coefficients for R, then G,
then B). In memory the opacity is the activated sigmoid value and the
quaternion is normalized.
"""
from __future__ import annotations

import io
import warnings

import numpy as np

from .assets import SplatAsset


class PlyParseError(ValueError):
    """Raised when a PLY buffer does not match the expected splat layout."""


_FIXED_BEFORE = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
_FIXED_AFTER = ["opacity", "scale_0", "scale_1", "rot_0", "rot_1", "rot_2", "rot_3"]


def _canonical_properties(sh_degree: int) -> list[str]:
    n_rest = 3 * (sh_degree + 1) ** 2 - 3
    return _FIXED_BEFORE + [f"f_rest_{i}" for i in range(n_rest)] + _FIXED_AFTER


def _parse_header(data: bytes):
    end = data.find(b"end_header\n")
    if end < 0:
        raise PlyParseError("missing end_header")
    body_offset = end + len(b"end_header\n")
    lines = data[:end].decode("ascii", errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PlyParseError("not a PLY file (missing 'ply' magic)")
    fmt = None
    count = None
    props: list[str] = []
    in_vertex = False
    for line in lines[1:]:
        parts = line.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] != "float":
                raise PlyParseError(f"property {parts[2]}: only float properties are supported")
            props.append(parts[2])
    if fmt != "binary_little_endian":
        raise PlyParseError(f"unsupported PLY format {fmt!r}; need binary_little_endian")
    if count is None:
        raise PlyParseError("missing 'element vertex' declaration")
    return count, props, body_offset


def load_ply(data: bytes, name: str = "asset") -> SplatAsset:
    """Parse a binary splat PLY into an asset with activated values."""
    count, props, offset = _parse_header(data)
    index = {p: i for i, p in enumerate(props)}

    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    k3 = n_rest + 3
    degree = int(round(np.sqrt(k3 / 3.0))) - 1
    if not 0 <= degree <= 3 or 3 * (degree + 1) ** 2 - 3 != n_rest:
        raise PlyParseError(f"f_rest property count {n_rest} is not of the form 3(L+1)^2-3")

    for prop in _canonical_properties(degree):
        if prop not in index:
            raise PlyParseError(f"missing required property {prop!r}")

    row = len(props) * 4
    body = data[offset:]
    if len(body) < count * row:
        raise PlyParseError(
            f"element count mismatch: header declares {count} vertices "
            f"({count * row} bytes) but body has {len(body)} bytes")
    raw = np.frombuffer(body[:count * row], dtype="<f4").reshape(count, len(props)).astype(np.float64)
    if not np.all(np.isfinite(raw)):
        raise PlyParseError("non-finite value in vertex data")

    def cols(names):
        return raw[:, [index[n] for n in names]]

    centers = cols(["x", "y", "z"])
    f_dc = cols(["f_dc_0", "f_dc_1", "f_dc_2"])
    k = (degree + 1) ** 2
    sh = np.zeros((count, k, 3), dtype=np.float64)
    sh[:, 0, :] = f_dc
    if n_rest:
        rest = cols([f"f_rest_{i}" for i in range(n_rest)])
        sh[:, 1:, :] = rest.reshape(count, 3, k - 1).transpose(0, 2, 1)

    logits = raw[:, index["opacity"]]
    opacities = 1.0 / (1.0 + np.exp(-logits))
    log_scales = cols(["scale_0", "scale_1"])
    rots = cols(["rot_0", "rot_1", "rot_2", "rot_3"])
    norms = np.linalg.norm(rots, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise PlyParseError("zero-norm quaternion in vertex data")
    return SplatAsset(name, degree, centers, rots / norms, log_scales, opacities, sh)


def save_ply(asset: SplatAsset) -> bytes:
    """Serialize an asset to binary PLY (inverse of load_ply)."""
    n = len(asset)
    props = _canonical_properties(asset.sh_degree)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in props]
    header.append("end_header")

    alphas = asset.opacities
    if np.any(alphas < 1e-6) or np.any(alphas > 1.0 - 1e-6):
        warnings.warn("opacity clamped to [1e-6, 1-1e-6] to keep the stored logit finite",
                      stacklevel=2)
        alphas = np.clip(alphas, 1e-6, 1.0 - 1e-6)
    logits = np.log(alphas / (1.0 - alphas))

    k = (asset.sh_degree + 1) ** 2
    rest = asset.sh_coeffs[:, 1:, :].transpose(0, 2, 1).reshape(n, 3 * (k - 1))
    table = np.hstack([
        asset.centers,
        asset.sh_coeffs[:, 0, :],
        rest,
        logits[:, None],
        asset.log_scales,
        asset.rotations,
    ]).astype("<f4")

    buf = io.BytesIO()
    buf.write(("\n".join(header) + "\n").encode("ascii"))
    buf.write(table.tobytes())
    return buf.getvalue()
