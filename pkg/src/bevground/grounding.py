"""BEV pose queries: score a queried (x, y, r) against every stored frame pose."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scene import BevPose


@dataclass(frozen=True)
class GroundingParams:
    """``sigma_p`` is in meters; BEV pixels are converted with the grid cell size."""

    sigma_p: float = 1.0
    beta: float = 2.0
    tau_s: float = 0.5
    t_max: int = 6

    def __post_init__(self):
        if not self.sigma_p > 0:
            raise ValueError(f"sigma_p must be > 0, got {self.sigma_p}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0 < self.tau_s <= 1:
            raise ValueError(f"tau_s must be in (0, 1], got {self.tau_s}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")


@dataclass(frozen=True)
class QueryResult:
    hit: bool
    frame_id: int
    score: float
    scores: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        if self.hit:
            return {"outcome": "hit", "frame_id": self.frame_id, "score": self.score}
        return {"outcome": "miss", "best_frame_id": self.frame_id, "score": self.score}

    @classmethod
    def from_dict(cls, d: dict) -> "QueryResult":
        hit = d["outcome"] == "hit"
        return cls(hit, int(d["frame_id"] if hit else d["best_frame_id"]), float(d["score"]))


@dataclass(frozen=True)
class FramePoseTable:
    frame_ids: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    rs: np.ndarray
    cell_size: float = 1.0

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[int, BevPose]], cell_size: float = 1.0) -> "FramePoseTable":
        if not entries:
            raise ValueError("frame pose table is empty")
        ids = np.array([int(f) for f, _ in entries])
        if len(np.unique(ids)) != len(ids):
            raise ValueError("frame ids in a pose table must be unique")
        return cls(
            frame_ids=ids,
            xs=np.array([p.x for _, p in entries], dtype=float),
            ys=np.array([p.y for _, p in entries], dtype=float),
            rs=np.array([p.r for _, p in entries], dtype=float),
            cell_size=float(cell_size),
        )

    def __len__(self) -> int:
        return len(self.frame_ids)

    def pose(self, frame_id: int) -> BevPose:
        i = int(np.flatnonzero(self.frame_ids == frame_id)[0])
        return BevPose(float(self.xs[i]), float(self.ys[i]), float(self.rs[i]))


def wrapped_angle_deg(a, b):
    """a - b wrapped to [-180, 180)."""
    return (np.asarray(a, dtype=float) - b + 180.0) % 360.0 - 180.0


def angle_gap_deg(a, b):
    """|a - b| wrapped to [0, 180]. Symmetric in its arguments bit for bit."""
    d = np.abs(np.asarray(a, dtype=float) - b) % 360.0
    return np.minimum(d, 360.0 - d)


def bev_similarity(query: BevPose, frame: BevPose, p: GroundingParams = GroundingParams(),
                   cell_size: float = 1.0) -> float:
    """exp(-(|dp|^2 / sigma_p^2 + beta^2 dr^2) / 2) with dp in meters and dr in wrapped radians."""
    dx = (query.x - frame.x) * cell_size
    dy = (query.y - frame.y) * cell_size
    dr = math.radians(float(angle_gap_deg(query.r, frame.r)))
    return math.exp(-0.5 * ((dx * dx + dy * dy) / p.sigma_p**2 + p.beta**2 * dr * dr))


def table_scores(query: BevPose, table: FramePoseTable, p: GroundingParams) -> np.ndarray:
    dx = (query.x - table.xs) * table.cell_size
    dy = (query.y - table.ys) * table.cell_size
    dr = np.radians(angle_gap_deg(query.r, table.rs))
    return np.exp(-0.5 * ((dx * dx + dy * dy) / p.sigma_p**2 + p.beta**2 * dr * dr))


def retrieve(query: BevPose, table: FramePoseTable, p: GroundingParams = GroundingParams(),
             keep_scores: bool = False) -> QueryResult:
    """Best-scoring stored frame; a Hit only when its score reaches ``tau_s``.

    Ties go to the smallest frame id.
    """
    if len(table) == 0:
        raise ValueError("frame pose table is empty")
    s = table_scores(query, table, p)
    best = s.max()
    j = int(table.frame_ids[s == best].min())
    return QueryResult(hit=bool(best >= p.tau_s), frame_id=j, score=float(best),
                       scores=s if keep_scores else None)


def parse_camera(arg) -> BevPose:
    """Accept ``[x, y, r]`` or a tool-call arguments object ``{"camera": [x, y, r]}``.

    ``arg`` may be a JSON string or an already-decoded value.
    """
    if isinstance(arg, str):
        arg = json.loads(arg)
    if isinstance(arg, dict):
        if "arguments" in arg:
            arg = arg["arguments"]
        arg = arg["camera"]
    if (not isinstance(arg, (list, tuple)) or len(arg) != 3
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in arg)):
        raise ValueError(f"camera must be an array of 3 numbers, got {arg!r}")
    if not all(math.isfinite(v) for v in arg):
        raise ValueError("camera values must be finite")
    return BevPose(float(arg[0]), float(arg[1]), float(arg[2]))
