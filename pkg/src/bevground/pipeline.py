"""End-to-end operations over scene bundles; the CLI is a thin wrapper around these."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import io
from .config import Config
from .dpp import select_keyframes
from .episode import POLICIES, RandomPolicy, Task, run_episode, score_group, trajectory_from_record, \
    trajectory_to_record
from .grounding import FramePoseTable, QueryResult, parse_camera, retrieve
from .scene import align_to_ground, backproject_depth, camera_to_bev_pose, fit_obb, rasterize_bev

log = logging.getLogger(__name__)


def preprocess_scene(out, trajectory, depth_dir=None, points=None, scores=None, tasks=None,
                     config: Config = Config()) -> Path:
    """Build a ground-aligned BEV bundle from a trajectory plus depth maps or a raw point file.

    Depth maps take precedence; the point file is used when the depth
    directory is absent or holds no depth files.
    """
    out = Path(out)
    poses = io.read_trajectory(trajectory)
    ids = [p.frame_id for p in poses]
    if ids != list(range(len(poses))):
        raise io.InputError(trajectory, "frame ids must be contiguous 0..n-1 in temporal order")

    K, depths = io.read_depth_dir(depth_dir) if depth_dir is not None and Path(depth_dir).is_dir() else (None, [])
    if depths:
        depth_ids = [d.frame_id for d in depths]
        if len(depths) != len(poses) or depth_ids != ids:
            raise io.InputError(depth_dir, f"frame-count mismatch: {len(depths)} depth maps for "
                                           f"{len(poses)} trajectory frames")
        cloud = np.concatenate([backproject_depth(d, K, p, config.stride) for d, p in zip(depths, poses)])
        source = "depth"
    elif points is not None:
        cloud = io.read_points(points)
        source = "points"
    else:
        raise io.InputError(depth_dir or trajectory, "no depth maps and no point file given")

    sem = None
    if scores is not None:
        sem = io.read_scores(scores)
        if len(sem.raw) != len(poses):
            raise io.InputError(scores, f"frame-count mismatch: {len(sem.raw)} scores for {len(poses)} frames")

    obb = fit_obb(cloud)
    ground, aligned = align_to_ground(cloud, obb)
    grid = rasterize_bev(aligned, config.resolved_cell_size)
    bev = [camera_to_bev_pose(p, ground, grid) for p in poses]
    table = FramePoseTable.from_entries(list(zip(ids, bev)), grid.cell_size)

    notes = list(obb.warnings)
    if ground.tie:
        notes.append("ground side undetermined: equal 5% spans, defaulted to the low end")
    n_degenerate = sum(b.degenerate for b in bev)
    if n_degenerate:
        notes.append(f"{n_degenerate} frames look straight up/down; heading set to 0")
    for note in notes:
        log.warning(note)

    meta = {
        "width": grid.width,
        "height": grid.height,
        "cell_size": grid.cell_size,
        "origin": grid.origin,
        "channels": list(grid.CHANNELS),
        "ground_transform": {"rotation": ground.rotation, "translation": ground.translation,
                             "flipped": ground.flipped, "tie": ground.tie},
        "obb": {"rotation": obb.rotation, "center": obb.center, "extents": obb.extents},
        "n_frames": len(poses),
        "n_points": int(len(cloud)),
        "source": source,
        "warnings": notes,
        "config": config.to_dict(),
    }
    io.write_json(out / "bev_meta.json", meta)
    io.write_grid(out / "bev_grid.bin", grid)
    io.write_json(out / "frame_poses.json", io.frame_table_to_dict(table, [b.degenerate for b in bev]))
    io.write_trajectory(out / "trajectory.jsonl", poses)
    if sem is not None:
        io.write_scores(out / "scores.json", sem)
    if tasks is not None:
        io.write_json(out / "tasks.json", io.read_json(tasks))
    io.write_manifest(out)
    log.info("bundle: %d frames, %d points, grid %dx%d @ %.4f m", len(poses), len(cloud),
             grid.width, grid.height, grid.cell_size)
    return out


def select_from_bundle(bundle, scores=None, config: Config | None = None) -> dict:
    b = io.read_bundle(bundle) if not isinstance(bundle, io.SceneBundle) else bundle
    cfg = config or b.config
    sem = io.read_scores(scores) if scores is not None else b.scores
    if sem is None:
        raise io.InputError(b.path, "no semantic scores in bundle and none given")
    if len(sem.raw) != len(b.poses):
        raise io.InputError(scores or b.path, f"{len(sem.raw)} scores for {len(b.poses)} frames")
    if cfg.k > len(b.poses):
        raise ValueError(f"k={cfg.k} exceeds the number of frames ({len(b.poses)})")
    res = select_keyframes(b.poses, sem, k=cfg.k, geometry=cfg.geometry, bandwidth=cfg.bandwidth,
                           tau=cfg.tau, temperature=cfg.temperature, alpha=cfg.alpha,
                           ridge=cfg.ridge, trunc_eps=cfg.trunc_eps)
    return {"indices": res.indices, "gains": res.gains, "objective": res.objective,
            "floored": res.floored, "n_frames": len(b.poses), "config": cfg.to_dict()}


def query_bundle(bundle, camera, config: Config | None = None) -> tuple[QueryResult, dict]:
    b = io.read_bundle(bundle) if not isinstance(bundle, io.SceneBundle) else bundle
    cfg = config or b.config
    res = retrieve(parse_camera(camera), b.table, cfg.grounding)
    return res, {**res.to_dict(), "config": cfg.to_dict()}


def _task(d: dict) -> Task:
    return Task(d["question"], str(d["gold"]), d.get("kind", "multiple-choice"), d.get("gold_frame"),
                tuple(d.get("options", ("A", "B", "C", "D"))))


def run_episodes(bundle, policy: str, seed: int = 0, group_size: int = 4, tasks=None,
                 config: Config | None = None) -> tuple[list, dict]:
    """Roll out ``group_size`` episodes per task; returns (log records, summary)."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    b = io.read_bundle(bundle) if not isinstance(bundle, io.SceneBundle) else bundle
    cfg = config or b.config
    task_dicts = io.read_json(tasks) if tasks is not None else b.tasks
    if not task_dicts:
        mid = int(b.table.frame_ids[len(b.table) // 2])
        task_dicts = [{"question": "Which option is correct?", "gold": "A", "gold_frame": mid}]
    records = []
    totals = []
    for i, td in enumerate(task_dicts):
        task = _task(td)
        trajs = []
        for g in range(group_size):
            rng = np.random.default_rng([seed, i, g])
            cls = POLICIES[policy]
            if cls is RandomPolicy:
                pol = cls(task, b.table, rng, cfg.t_max, b.grid.width, b.grid.height)
            else:
                pol = cls(task, b.table, rng)
            trajs.append(run_episode(pol, b.table, task, cfg.grounding, episode_id=f"{i}-{g}", group_id=str(i)))
        rewards, adv = score_group(trajs, cfg.reward)
        for t, r, a in zip(trajs, rewards, adv):
            records.append(trajectory_to_record(t, r, a, cfg.to_dict()))
            totals.append(r)
    return records, summarize(totals, policy, seed, cfg)


def summarize(breakdowns, policy, seed, cfg: Config) -> dict:
    mean = {k: float(np.mean([b.to_dict()[k] for b in breakdowns])) for k in ("acc", "format", "tool",
                                                                              "spatial", "total")}
    return {"policy": policy, "seed": seed, "episodes": len(breakdowns), "mean_rewards": mean,
            "config": cfg.to_dict()}


def rescore_log(path, config: Config | None = None) -> tuple[list, dict]:
    """Recompute rewards and group advantages for an existing trajectory log."""
    recs = io.read_jsonl(path)
    if not recs:
        raise io.InputError(path, "trajectory log is empty")
    cfg = config or (Config.from_dict(recs[0]["config"]) if "config" in recs[0] else Config())
    groups: dict = {}
    for rec in recs:
        groups.setdefault(str(rec.get("group_id", "0")), []).append(rec)
    out, all_b = [], []
    for gid in groups:
        trajs = [trajectory_from_record(r) for r in groups[gid]]
        rewards, adv = score_group(trajs, cfg.reward)
        for t, r, a in zip(trajs, rewards, adv):
            out.append(trajectory_to_record(t, r, a, cfg.to_dict()))
            all_b.append(r)
    return out, summarize(all_b, "rescored", None, cfg)
