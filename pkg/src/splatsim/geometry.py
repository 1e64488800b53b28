"""Rigid transforms and quaternion helpers shared across the package.

Quaternions are stored in (w, x, y, z) order throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation


def normalize_quat(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm. Raises on zero/non-finite input."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if not np.all(np.isfinite(q)) or np.any(n == 0.0):
        raise ValueError("quaternion must be finite and nonzero")
    return q / n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (w,x,y,z) to rotation matrix/matrices."""
    q = np.asarray(q, dtype=np.float64)
    # scipy uses (x, y, z, w)
    return Rotation.from_quat(np.roll(q, -1, axis=-1)).as_matrix()


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix/matrices to unit quaternion(s) (w,x,y,z), w >= 0."""
    q = Rotation.from_matrix(np.asarray(m, dtype=np.float64)).as_quat()
    q = np.roll(q, 1, axis=-1)
    # canonical sign so round-trips are stable
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b for (w,x,y,z) quaternions; broadcasts."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _check_rotation(m: np.ndarray, tol: float = 1e-6) -> None:
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    if not np.allclose(m @ m.T, np.eye(3), atol=tol):
        raise ValueError("rotation matrix is not orthonormal")
    if np.linalg.det(m) < 0.0:
        raise ValueError("rotation matrix has negative determinant (reflection)")


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform y = R x + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        _check_rotation(r)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_quat(cls, quat_wxyz, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(quat_to_matrix(normalize_quat(quat_wxyz)), np.asarray(translation, dtype=np.float64))

    @property
    def quat_wxyz(self) -> np.ndarray:
        return matrix_to_quat(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)
