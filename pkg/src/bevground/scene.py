"""Depth back-projection, oriented bounding box, ground alignment and BEV rasterization.

Coordinate conventions
----------------------
* Poses are extrinsics: ``X = R^T (depth * K^-1 [u, v, 1] - t)``.
* The ground transform maps a world point to the aligned frame via
  ``rotation @ X + translation``; aligned z is height above the ground.
* BEV pixel coordinates are ``((X - origin_x) / cell, (Y - origin_y) / cell)``
  with x rightward and y downward when the grid is drawn as an image.
* Heading ``r`` (degrees) points along ``(-sin r, -cos r)`` in BEV pixels:
  0 is up, 90 left, 180 down, 270 right.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .geometry import Pose


class DegenerateCloudError(ValueError):
    def __init__(self, rank: int, message: str | None = None):
        self.rank = rank
        super().__init__(message or f"point cloud is degenerate (numerical rank {rank} < 3)")


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])


@dataclass(frozen=True)
class DepthMap:
    frame_id: int
    values: np.ndarray  # (height, width), meters; <= 0 is invalid


@dataclass(frozen=True)
class ObbFrame:
    """Box whose rows of ``rotation`` are the box axes: box coords = rotation @ (p - center).

    Extents are sorted descending, so the last row is the thinnest axis.
    """

    rotation: np.ndarray
    center: np.ndarray
    extents: np.ndarray
    warnings: tuple = ()

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))


@dataclass(frozen=True)
class GroundTransform:
    rotation: np.ndarray
    translation: np.ndarray
    flipped: bool = False
    tie: bool = False

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class BevGrid:
    """Per-cell statistics, ``data`` has shape (height, width, 4).

    Channels: occupancy count, min z, max z, mean z. Heights of empty cells are NaN.
    """

    cell_size: float
    origin: np.ndarray
    width: int
    height: int
    data: np.ndarray = field(repr=False)

    CHANNELS = ("occupancy", "min_z", "max_z", "mean_z")

    @property
    def occupancy(self) -> np.ndarray:
        return self.data[..., 0]

    def world_to_pixel(self, xy) -> np.ndarray:
        return (np.asarray(xy, dtype=float) - self.origin) / self.cell_size

    def pixel_to_world(self, px) -> np.ndarray:
        return np.asarray(px, dtype=float) * self.cell_size + self.origin


@dataclass(frozen=True)
class BevPose:
    x: float
    y: float
    r: float
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "r", wrap_heading(self.r))


def wrap_heading(r: float) -> float:
    r = float(r) % 360.0
    return 0.0 if r >= 360.0 else r


def backproject_depth(d: DepthMap, K: Intrinsics, pose: Pose, stride: int = 8) -> np.ndarray:
    """World points for every valid depth sample on a ``stride`` pixel grid. Returns (N, 3)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    depth = np.asarray(d.values, dtype=float)
    if depth.shape != (K.height, K.width):
        raise ValueError(f"depth map {depth.shape} does not match intrinsics {(K.height, K.width)}")
    v, u = np.mgrid[0 : K.height : stride, 0 : K.width : stride]
    z = depth[v, u]
    valid = np.isfinite(z) & (z > 0)
    u, v, z = u[valid], v[valid], z[valid]
    cam = np.stack([(u - K.cx) / K.fx * z, (v - K.cy) / K.fy * z, z], axis=1)
    # R^-1 (x - t) written row-wise: (x - t) @ R
    return (cam - pose.translation) @ pose.matrix


def project_points(points, K: Intrinsics, pose: Pose):
    """Inverse of back-projection: pixel coordinates (N, 2) and depths (N,)."""
    cam = np.asarray(points, dtype=float) @ pose.matrix.T + pose.translation
    z = cam[:, 2]
    uv = np.stack([K.fx * cam[:, 0] / z + K.cx, K.fy * cam[:, 1] / z + K.cy], axis=1)
    return uv, z


def _euler(a: float, b: float, c: float) -> np.ndarray:
    ca, sa, cb, sb, cc, sc = math.cos(a), math.sin(a), math.cos(b), math.sin(b), math.cos(c), math.sin(c)
    Rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    Ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    Rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def _box_volume(R, pts) -> float:
    proj = pts @ R.T
    return float(np.prod(proj.max(axis=0) - proj.min(axis=0)))


def _hull_points(pts: np.ndarray) -> np.ndarray:
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        return pts


def _check_rank(pts: np.ndarray) -> None:
    if len(pts) < 4:
        raise DegenerateCloudError(min(len(pts) - 1, 3) if len(pts) else 0,
                                   f"need at least 4 points, got {len(pts)}")
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * max(sv[0], 1e-300)))
    if rank < 3:
        raise DegenerateCloudError(rank)


def pca_frame(points) -> np.ndarray:
    """Rotation (rows = principal axes, largest variance first), det +1."""
    pts = np.asarray(points, dtype=float)
    _, vecs = np.linalg.eigh(np.cov((pts - pts.mean(axis=0)).T))
    R = vecs[:, ::-1].T.copy()
    if np.linalg.det(R) < 0:
        R[2] *= -1
    return R


def _descend(R0, hull, start_deg: float, stop_deg: float, rounds: int):
    best_R, best_v = R0, _box_volume(R0, hull)
    for _ in range(rounds):
        step = math.radians(start_deg)
        while step >= math.radians(stop_deg):
            improved = True
            while improved:
                improved = False
                for axis in range(3):
                    for sign in (1.0, -1.0):
                        offs = [0.0, 0.0, 0.0]
                        offs[axis] = sign * step
                        cand = _euler(*offs) @ best_R
                        v = _box_volume(cand, hull)
                        if v < best_v - 1e-15 * max(best_v, 1.0):
                            best_R, best_v = cand, v
                            improved = True
            step /= 2.0
    return best_R, best_v


def _frame_from_rotation(R, pts) -> ObbFrame:
    proj = pts @ R.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    ext = hi - lo
    order = np.argsort(-ext, kind="stable")
    R = R[order]
    ext = ext[order]
    mid = (0.5 * (lo + hi))[order]
    if np.linalg.det(R) < 0:
        R = R.copy()
        R[2] *= -1
        mid[2] *= -1
    center = R.T @ mid
    notes = ()
    if ext[2] > 0 and ext[1] / ext[2] < 1.2:
        notes = (f"ground plane ambiguous: l_y/l_z = {ext[1] / ext[2]:.3f} < 1.2",)
    return ObbFrame(rotation=R, center=center, extents=ext, warnings=notes)


def fit_obb(points, start_deg: float = 10.0, stop_deg: float = 0.15, rounds: int = 3,
            polish_deg: float = 1e-6) -> ObbFrame:
    """Approximate minimum-volume oriented bounding box.

    Starts from the principal axes and refines with coordinate descent over
    three Euler-angle offsets, halving the step from ``start_deg`` down to
    ``stop_deg``; the whole schedule is repeated ``rounds`` times, then a last
    pass keeps halving from ``stop_deg`` to ``polish_deg``. Only convex
    hull vertices enter the volume evaluation. A thin-versus-middle extent
    ratio below 1.2 is reported in ``ObbFrame.warnings``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
    _check_rank(pts)
    hull = _hull_points(pts)
    R, _ = _descend(pca_frame(hull), hull, start_deg, stop_deg, rounds)
    if polish_deg < stop_deg:
        R, _ = _descend(R, hull, stop_deg, polish_deg, 1)
    return _frame_from_rotation(R, hull)


def pca_box_volume(points) -> float:
    pts = np.asarray(points, dtype=float)
    return _box_volume(pca_frame(_hull_points(pts)), pts)


def percentile(values, p: float) -> float:
    """Nearest-rank percentile: sorted[ceil(p/100 * n) - 1], clamped to the array."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise ValueError("percentile of an empty vector")
    if not 0 <= p <= 100:
        raise ValueError(f"p must be in [0, 100], got {p}")
    idx = math.ceil(p / 100.0 * v.size) - 1
    return float(v[min(max(idx, 0), v.size - 1)])


@dataclass(frozen=True)
class GroundAxis:
    ground_at_low_end: bool
    d_bottom: float
    d_top: float
    tie: bool = False


def estimate_ground_axis(z_values) -> GroundAxis:
    """Pick the end of the vertical axis whose extreme 5% of points is tighter."""
    z = np.asarray(z_values, dtype=float).reshape(-1)
    if z.size < 20:
        raise ValueError(f"need at least 20 height samples, got {z.size}")
    d_bottom = percentile(z, 5) - percentile(z, 0)
    d_top = percentile(z, 100) - percentile(z, 95)
    if abs(d_bottom - d_top) < 1e-9:
        warnings.warn("ground side undetermined: equal 5% spans, defaulting to the low end", stacklevel=2)
        return GroundAxis(True, d_bottom, d_top, tie=True)
    return GroundAxis(d_bottom < d_top, d_bottom, d_top)


def align_to_ground(points, obb: ObbFrame):
    """Rotate into the box frame (thinnest extent as z), orient z upward, put the floor at z = 0.

    Returns ``(GroundTransform, aligned_points)``.
    """
    pts = np.asarray(points, dtype=float)
    R = np.asarray(obb.rotation, dtype=float)
    z = pts @ R[2]
    axis = estimate_ground_axis(z)
    if not axis.ground_at_low_end:
        # half turn about x keeps the transform a proper rotation
        R = np.diag([1.0, -1.0, -1.0]) @ R
        z = -z
    t = np.array([0.0, 0.0, -percentile(z, 5)])
    gt = GroundTransform(rotation=R, translation=t, flipped=not axis.ground_at_low_end, tie=axis.tie)
    return gt, gt.apply(pts)


def auto_cell_size(points, max_cells: int = 256) -> float:
    xy = np.asarray(points, dtype=float)[:, :2]
    span = float(np.max(xy.max(axis=0) - xy.min(axis=0))) if len(xy) else 0.0
    if span <= 0:
        return 1.0
    # floor(span / cell) + 1 <= max_cells
    return span / (max_cells - 1) * (1 + 1e-9)


def rasterize_bev(aligned, cell_size: float | None = None) -> BevGrid:
    """Occupancy and min/max/mean height per cell of the ground plane."""
    pts = np.asarray(aligned, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("cannot rasterize an empty point cloud")
    if cell_size is None:
        cell_size = auto_cell_size(pts)
    if not cell_size > 0:
        raise ValueError(f"cell_size must be > 0, got {cell_size}")
    origin = pts[:, :2].min(axis=0)
    ij = np.floor((pts[:, :2] - origin) / cell_size).astype(np.int64)
    width = int(ij[:, 0].max()) + 1
    height = int(ij[:, 1].max()) + 1
    flat = ij[:, 1] * width + ij[:, 0]
    z = pts[:, 2]
    size = width * height
    count = np.bincount(flat, minlength=size).astype(float)
    zsum = np.bincount(flat, weights=z, minlength=size)
    zmin = np.full(size, np.inf)
    zmax = np.full(size, -np.inf)
    np.minimum.at(zmin, flat, z)
    np.maximum.at(zmax, flat, z)
    empty = count == 0
    mean = np.divide(zsum, count, out=np.full(size, np.nan), where=~empty)
    zmin[empty] = np.nan
    zmax[empty] = np.nan
    data = np.stack([count, zmin, zmax, mean], axis=1).reshape(height, width, 4)
    return BevGrid(cell_size=float(cell_size), origin=origin, width=width, height=height, data=data)


def heading_from_direction(dx: float, dy: float) -> float:
    """Heading in degrees for a planar direction in BEV pixel coordinates."""
    return wrap_heading(math.degrees(math.atan2(-dx, -dy)))


def heading_direction(r: float) -> np.ndarray:
    a = math.radians(r)
    return np.array([-math.sin(a), -math.cos(a)])


def camera_to_bev_pose(pose: Pose, ground: GroundTransform, grid: BevGrid) -> BevPose:
    """Camera center and optical-axis heading expressed on the BEV grid."""
    c = ground.apply(pose.center[None, :])[0]
    f = ground.rotation @ pose.forward
    px = grid.world_to_pixel(c[:2])
    planar = f[:2]
    if np.linalg.norm(planar) < 1e-6:
        return BevPose(float(px[0]), float(px[1]), 0.0, degenerate=True)
    return BevPose(float(px[0]), float(px[1]), heading_from_direction(planar[0], planar[1]))
