"""Readers and writers for trajectories, scores, depth, point files and scene bundles.

Every writer is deterministic and atomic (temp file + rename), and every
writer has a matching reader so that write -> read -> write is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .geometry import Pose
from .grounding import FramePoseTable
from .scene import BevGrid, BevPose, DepthMap, GroundTransform, Intrinsics
from .semantic import SemanticScores

BUNDLE_FILES = ("bev_meta.json", "bev_grid.bin", "frame_poses.json", "trajectory.jsonl")
OPTIONAL_BUNDLE_FILES = ("scores.json", "tasks.json")


class InputError(ValueError):
    """Malformed or inconsistent input, with file (and line) context."""

    def __init__(self, path, message: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path, self.line = str(path), line


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2) + "\n"


def write_json(path, obj) -> None:
    atomic_write_bytes(path, dumps(obj).encode())


def write_jsonl(path, records) -> None:
    atomic_write_bytes(path, "".join(json.dumps(_plain(r)) + "\n" for r in records).encode())


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(path, f"invalid JSON: {exc.msg}", exc.lineno) from exc
    except OSError as exc:
        raise InputError(path, exc.strerror or str(exc)) from exc


def read_jsonl(path) -> list:
    out = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        out.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise InputError(path, f"invalid JSON: {exc.msg}", lineno) from exc
    except OSError as exc:
        raise InputError(path, exc.strerror or str(exc)) from exc
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- trajectory ----------------------------------------------------------------

def write_trajectory(path, poses) -> None:
    write_jsonl(path, [{"frame_id": p.frame_id, "t": p.translation, "q": p.rotation} for p in poses])


def read_trajectory(path) -> list:
    poses = []
    for lineno, rec in enumerate(read_jsonl(path), 1):
        try:
            poses.append(Pose(rec["q"], rec["t"], int(rec["frame_id"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(path, f"bad pose record: {exc}", lineno) from exc
    if not poses:
        raise InputError(path, "trajectory is empty")
    ids = [p.frame_id for p in poses]
    if len(set(ids)) != len(ids):
        raise InputError(path, "duplicate frame_id in trajectory")
    return poses


# --- semantic scores --------------------------------------------------------------

def write_scores(path, scores: SemanticScores) -> None:
    if scores.per_keyword is not None:
        write_json(path, {"keywords": list(scores.keywords or []), "per_keyword": scores.per_keyword})
    else:
        write_json(path, {"raw": scores.raw})


def read_scores(path) -> SemanticScores:
    d = read_json(path)
    try:
        if "per_keyword" in d:
            return SemanticScores.from_keywords(d["per_keyword"], d.get("keywords"))
        return SemanticScores(d["raw"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(path, f"bad scores file: {exc}") from exc


# --- depth and points -------------------------------------------------------------

def intrinsics_to_dict(K: Intrinsics) -> dict:
    return {"width": K.width, "height": K.height, "fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy}


def write_depth_dir(path, K: Intrinsics, depths) -> None:
    path = Path(path)
    write_json(path / "intrinsics.json", intrinsics_to_dict(K))
    for d in depths:
        atomic_write_bytes(path / f"{d.frame_id:06d}.bin", np.asarray(d.values, dtype="<f4").tobytes())


def read_depth_dir(path):
    """Returns ``(Intrinsics, [DepthMap, ...])`` sorted by frame id; empty list if no depth files."""
    path = Path(path)
    files = sorted(path.glob("*.bin"))
    if not files:
        return None, []
    meta = read_json(path / "intrinsics.json")
    try:
        K = Intrinsics(float(meta["fx"]), float(meta["fy"]), float(meta["cx"]), float(meta["cy"]),
                       int(meta["width"]), int(meta["height"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(path / "intrinsics.json", f"bad intrinsics: {exc}") from exc
    depths = []
    for f in files:
        try:
            fid = int(f.stem)
        except ValueError as exc:
            raise InputError(f, "depth file name must be the integer frame id") from exc
        raw = np.frombuffer(f.read_bytes(), dtype="<f4")
        if raw.size != K.width * K.height:
            raise InputError(f, f"expected {K.width * K.height} float32 values, found {raw.size}")
        depths.append(DepthMap(fid, raw.reshape(K.height, K.width).astype(float)))
    return K, depths


def write_points(path, points) -> None:
    atomic_write_bytes(path, np.asarray(points, dtype="<f4").reshape(-1, 3).tobytes())


def read_points(path) -> np.ndarray:
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if raw.size % 3:
        raise InputError(path, f"point file holds {raw.size} floats, not a multiple of 3")
    pts = raw.reshape(-1, 3).astype(float)
    if not np.all(np.isfinite(pts)):
        raise InputError(path, "point file contains non-finite coordinates")
    return pts


# --- scene bundle -------------------------------------------------------------------

@dataclass
class SceneBundle:
    path: Path
    config: Config
    poses: list
    grid: BevGrid
    ground: GroundTransform
    table: FramePoseTable
    meta: dict
    scores: SemanticScores | None = None
    tasks: list | None = None


def write_grid(path, grid: BevGrid) -> None:
    atomic_write_bytes(path, np.asarray(grid.data, dtype="<f4").tobytes())


def read_grid(path, meta: dict) -> BevGrid:
    w, h = int(meta["width"]), int(meta["height"])
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if raw.size != w * h * 4:
        raise InputError(path, f"expected {w * h * 4} float32 values, found {raw.size}")
    return BevGrid(cell_size=float(meta["cell_size"]), origin=np.array(meta["origin"], dtype=float),
                   width=w, height=h, data=raw.reshape(h, w, 4).astype(float))


def frame_table_to_dict(table: FramePoseTable, degenerate=None) -> dict:
    frames = []
    for i, fid in enumerate(table.frame_ids):
        rec = {"frame_id": int(fid), "x": float(table.xs[i]), "y": float(table.ys[i]), "r": float(table.rs[i])}
        if degenerate is not None and degenerate[i]:
            rec["degenerate"] = True
        frames.append(rec)
    return {"cell_size": table.cell_size, "frames": frames}


def frame_table_from_dict(d: dict) -> FramePoseTable:
    entries = [(f["frame_id"], BevPose(f["x"], f["y"], f["r"])) for f in d["frames"]]
    return FramePoseTable.from_entries(entries, d["cell_size"])


def write_manifest(out) -> None:
    out = Path(out)
    names = [n for n in BUNDLE_FILES + OPTIONAL_BUNDLE_FILES if (out / n).exists()]
    write_json(out / "manifest.json", {"files": {n: sha256_file(out / n) for n in names}})


def verify_manifest(path) -> None:
    path = Path(path)
    manifest = read_json(path / "manifest.json")
    for name, digest in manifest["files"].items():
        f = path / name
        if not f.exists():
            raise InputError(f, "listed in manifest but missing")
        if sha256_file(f) != digest:
            raise InputError(f, "content hash does not match manifest")


def read_bundle(path) -> SceneBundle:
    path = Path(path)
    verify_manifest(path)
    meta = read_json(path / "bev_meta.json")
    config = Config.from_dict(meta["config"])
    grid = read_grid(path / "bev_grid.bin", meta)
    g = meta["ground_transform"]
    ground = GroundTransform(np.array(g["rotation"], dtype=float), np.array(g["translation"], dtype=float),
                             bool(g.get("flipped", False)), bool(g.get("tie", False)))
    table = frame_table_from_dict(read_json(path / "frame_poses.json"))
    poses = read_trajectory(path / "trajectory.jsonl")
    if len(poses) != len(table):
        raise InputError(path, f"trajectory has {len(poses)} frames but pose table has {len(table)}")
    scores = read_scores(path / "scores.json") if (path / "scores.json").exists() else None
    tasks = read_json(path / "tasks.json") if (path / "tasks.json").exists() else None
    return SceneBundle(path, config, poses, grid, ground, table, meta, scores, tasks)
