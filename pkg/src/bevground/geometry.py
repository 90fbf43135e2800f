"""Rigid-body poses and the scale-aware SE(3) distance used to build viewpoint graphs.

Rotations are stored as unit quaternions in (w, x, y, z) order. A pose holds the
camera extrinsics (R, t): a world point X maps to camera coordinates R @ X + t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-3


@dataclass(frozen=True)
class GeometryParams:
    """Translation scale ``sigma_t`` (meters) and rotation weight ``beta``."""

    sigma_t: float = 1.0
    beta: float = 2.0

    def __post_init__(self):
        if not self.sigma_t > 0:
            raise ValueError(f"sigma_t must be > 0, got {self.sigma_t}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


def normalize_quaternion(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValueError(f"quaternion must be 4 finite numbers, got {q!r}")
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise ValueError(f"quaternion norm {norm:.6g} deviates from 1 by more than {QUAT_NORM_TOL}")
    # already-unit inputs pass through untouched so serialization round-trips exactly
    return q.copy() if abs(norm - 1.0) < 1e-12 else q / norm


def quat_to_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def axis_angle_quat(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[math.cos(angle / 2)], math.sin(angle / 2) * axis])


@dataclass(frozen=True, eq=False)
class Pose:
    """Camera extrinsics for one video frame.

    ``rotation`` is renormalized on construction; deviations from unit norm
    larger than 1e-3 are rejected.
    """

    rotation: np.ndarray
    translation: np.ndarray
    frame_id: int = 0
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = normalize_quaternion(self.rotation)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError(f"translation must be 3 finite numbers, got {self.translation!r}")
        if int(self.frame_id) < 0:
            raise ValueError(f"frame_id must be non-negative, got {self.frame_id}")
        q.setflags(write=False)
        t.setflags(write=False)
        R = quat_to_matrix(q)
        R.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "frame_id", int(self.frame_id))
        object.__setattr__(self, "_matrix", R)

    @classmethod
    def from_matrix(cls, R, t, frame_id: int = 0) -> "Pose":
        return cls(matrix_to_quat(R), t, frame_id)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T t."""
        return -self._matrix.T @ self.translation

    @property
    def forward(self) -> np.ndarray:
        """Optical axis (+z of the camera) expressed in world coordinates."""
        return self._matrix[2].copy()


def rotation_geodesic(a, b) -> float:
    """Angle in [0, pi] of the relative rotation between two unit quaternions."""
    Ra = quat_to_matrix(normalize_quaternion(a))
    Rb = quat_to_matrix(normalize_quaternion(b))
    return _geodesic_from_matrices(Ra, Rb)


def _geodesic_from_matrices(Ra, Rb) -> float:
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def pose_distance_sq(i: Pose, j: Pose, p: GeometryParams = GeometryParams()) -> float:
    """||t_i - t_j||^2 / sigma_t^2 + beta^2 * theta(R_i, R_j)^2."""
    dt = i.translation - j.translation
    theta = _geodesic_from_matrices(i.matrix, j.matrix)
    return float(dt @ dt) / p.sigma_t**2 + p.beta**2 * theta**2


def pose_affinity(d_sq):
    """exp(-d^2 / 2); works elementwise on arrays."""
    d_sq = np.asarray(d_sq, dtype=float)
    if np.any(d_sq < 0):
        raise ValueError("squared distance must be non-negative")
    out = np.exp(-0.5 * d_sq)
    return float(out) if out.ndim == 0 else out


def pairwise_distance_sq(poses_a, poses_b, p: GeometryParams = GeometryParams()) -> np.ndarray:
    """Vectorized ``pose_distance_sq`` between aligned pose lists (elementwise, not all pairs)."""
    Ra = np.stack([x.matrix for x in poses_a])
    Rb = np.stack([x.matrix for x in poses_b])
    ta = np.stack([x.translation for x in poses_a])
    tb = np.stack([x.translation for x in poses_b])
    # tr(Ra^T Rb) = sum of elementwise products
    c = (np.einsum("nij,nij->n", Ra, Rb) - 1.0) / 2.0
    theta = np.arccos(np.clip(c, -1.0, 1.0))
    dt = ta - tb
    return np.einsum("ni,ni->n", dt, dt) / p.sigma_t**2 + p.beta**2 * theta**2
