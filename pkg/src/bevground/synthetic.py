"""Synthetic scenes and trajectories with known ground truth.

The room generator ray-casts depth maps of an open-topped box room with
furniture, seen from a camera circling the room. The whole scene is then
moved by a seeded random rigid transform so that ground recovery has work to do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .geometry import Pose, axis_angle_quat
from .scene import DepthMap, Intrinsics, backproject_depth
from .semantic import SemanticScores, stub_keyword_scores

FURNITURE = (
    # name, center (x, y), size (x, y, z)
    ("bed", (1.6, 4.6), (2.0, 1.6, 0.6)),
    ("table", (5.6, 3.0), (1.2, 0.8, 0.75)),
    ("sofa", (4.0, 0.6), (2.0, 0.9, 0.8)),
    ("chair", (6.9, 4.8), (0.5, 0.5, 0.9)),
)


@dataclass
class SyntheticRoom:
    poses: list
    intrinsics: Intrinsics
    depths: list
    yaw: np.ndarray  # per-frame heading in the untransformed room frame, radians
    world_rotation: np.ndarray  # room frame -> world frame
    world_translation: np.ndarray
    scores: SemanticScores
    tasks: list
    room_size: tuple = (8.0, 6.0, 2.6)
    object_centers: dict = field(default_factory=dict)

    @property
    def up(self) -> np.ndarray:
        """The true vertical expressed in world coordinates."""
        return self.world_rotation @ np.array([0.0, 0.0, 1.0])

    def point_cloud(self, stride: int = 8) -> np.ndarray:
        return np.concatenate([backproject_depth(d, self.intrinsics, p, stride)
                               for d, p in zip(self.depths, self.poses)])


def _camera_basis(yaw: float, pitch: float) -> np.ndarray:
    """Camera-to-room rotation; columns are camera x (right), y (down), z (forward)."""
    fwd = np.array([math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), -math.sin(pitch)])
    right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=1)


def _raycast(origin, dirs, room, boxes) -> np.ndarray:
    """Distance along each ray to the first surface; 0 where nothing is hit."""
    Lx, Ly, H = room
    best = np.full(len(dirs), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis, value in ((2, 0.0), (0, 0.0), (0, Lx), (1, 0.0), (1, Ly)):
            lam = (value - origin[axis]) / dirs[:, axis]
            hit = origin[None, :] + lam[:, None] * dirs
            ok = (lam > 1e-6) & np.all(hit >= -1e-9, axis=1) & (hit[:, 0] <= Lx + 1e-9) \
                & (hit[:, 1] <= Ly + 1e-9) & (hit[:, 2] <= H)
            best = np.where(ok & (lam < best), lam, best)
        for lo, hi in boxes:
            t1 = (lo[None, :] - origin[None, :]) / dirs
            t2 = (hi[None, :] - origin[None, :]) / dirs
            tmin = np.nanmax(np.minimum(t1, t2), axis=1)
            tmax = np.nanmin(np.maximum(t1, t2), axis=1)
            ok = (tmax >= tmin) & (tmin > 1e-6)
            best = np.where(ok & (tmin < best), tmin, best)
    best[~np.isfinite(best)] = 0.0
    return best


def make_room(n_frames: int = 500, width: int = 192, height: int = 144, seed: int = 0,
              noise: float = 0.003, cam_height: float = 1.4, pitch_deg: float = 20.0,
              world_transform: bool = True) -> SyntheticRoom:
    """Render a synthetic room scan. Deterministic for a given seed.

    With ``world_transform=False`` the room frame is the world frame (z up,
    floor at z = 0).
    """
    rng = np.random.default_rng(seed)
    room = (8.0, 6.0, 2.6)
    K = Intrinsics(fx=150.0, fy=150.0, cx=(width - 1) / 2, cy=(height - 1) / 2, width=width, height=height)
    boxes = []
    centers = {}
    for name, (cx, cy), (sx, sy, sz) in FURNITURE:
        boxes.append((np.array([cx - sx / 2, cy - sy / 2, 0.0]), np.array([cx + sx / 2, cy + sy / 2, sz])))
        centers[name] = np.array([cx, cy, sz / 2])

    Rw = Rotation.random(random_state=seed).as_matrix()
    tw = rng.uniform(-5, 5, 3)
    if not world_transform:
        Rw, tw = np.eye(3), np.zeros(3)

    v, u = np.mgrid[0:height, 0:width]
    rays_cam = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u, dtype=float)], axis=-1).reshape(-1, 3)

    mid = np.array([room[0] / 2, room[1] / 2])
    poses, depths, yaws, fwds, origins = [], [], [], [], []
    pitch = math.radians(pitch_deg)
    for i in range(n_frames):
        phase = 2 * math.pi * i / n_frames
        c = np.array([mid[0] + 2.4 * math.cos(phase), mid[1] + 1.6 * math.sin(phase), cam_height])
        # look back across the room, sweeping +-40 degrees around the center direction
        to_center = math.atan2(mid[1] - c[1], mid[0] - c[0])
        yaw = to_center + math.radians(40.0) * math.sin(3 * phase)
        B = _camera_basis(yaw, pitch)
        depth = _raycast(c, rays_cam @ B.T, room, boxes).reshape(height, width)
        depth = np.where(depth > 0, depth * (1 + noise * rng.standard_normal(depth.shape)), 0.0)
        # extrinsics in the transformed world: X_room = Rw^T (X_world - tw)
        R_room = B.T
        R = R_room @ Rw.T
        t = -R_room @ c - R @ tw
        poses.append(Pose.from_matrix(R, t, i))
        depths.append(DepthMap(i, depth))
        yaws.append(yaw)
        fwds.append(B[:, 2])
        origins.append(c)

    names = [f[0] for f in FURNITURE]
    per_kw = stub_keyword_scores(np.array(fwds), np.array(origins), [centers[n] for n in names])
    scores = SemanticScores.from_keywords(per_kw, names)
    tasks = []
    letters = "ABCD"
    for k, name in enumerate(names):
        tasks.append({"question": f"Which object is directly in view at the {name}'s best viewpoint?",
                      "gold": letters[k % 4], "kind": "multiple-choice",
                      "gold_frame": int(np.argmax(per_kw[:, k])), "options": list(letters)})
    tasks.append({"question": "How many pieces of furniture are in the room?", "gold": str(len(names)),
                  "kind": "numeric", "gold_frame": int(np.argmax(per_kw.max(axis=1))), "options": ["3", "4", "5", "6"]})
    world_centers = {n: Rw @ c + tw for n, c in centers.items()}
    return SyntheticRoom(poses, K, depths, np.array(yaws), Rw, tw, scores, tasks, room, world_centers)


def random_walk_poses(n: int, rng, step: float = 0.6, turn: float = 0.3) -> list:
    """Smooth random trajectory: Gaussian translation steps and yaw-pitch drift."""
    t = np.cumsum(rng.normal(0.0, step, (n, 3)), axis=0)
    poses = []
    yaw = pitch = 0.0
    for i in range(n):
        yaw += rng.normal(0.0, turn)
        pitch += rng.normal(0.0, turn / 3)
        q = (Rotation.from_euler("zy", [yaw, pitch])).as_quat()  # x, y, z, w
        poses.append(Pose(np.roll(q, 1), t[i], i))
    return poses


def two_cluster_poses(n_per_cluster: int = 6, separation: float = 10.0, spread: float = 0.15,
                      seed: int = 0) -> list:
    """Two temporally contiguous groups of nearby poses far apart from each other."""
    rng = np.random.default_rng(seed)
    poses = []
    for c in range(2):
        base = np.array([separation * c, 0.0, 0.0])
        for _ in range(n_per_cluster):
            t = base + rng.normal(0.0, spread, 3)
            q = axis_angle_quat([0, 0, 1], rng.normal(0.0, spread) + math.pi * c)
            poses.append(Pose(q, t, len(poses)))
    return poses


def line_poses(n: int, spacing: float = 0.5) -> list:
    """Identity-rotation poses on a straight line: distance from frame 0 grows monotonically."""
    return [Pose([1.0, 0.0, 0.0, 0.0], [spacing * i, 0.0, 0.0], i) for i in range(n)]
