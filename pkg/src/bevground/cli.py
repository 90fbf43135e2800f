"""Command-line entry point: preprocess, select, query, episode, reward (plus synth for test scenes)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import Config, load_config
from .pipeline import preprocess_scene, query_bundle, rescore_log, run_episodes, select_from_bundle
from .scene import DegenerateCloudError

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_MISS = 0, 1, 2, 3



def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (unknown keys are rejected)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bevground", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preprocess", parents=[common], help="build a BEV scene bundle")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--depth-dir")
    s.add_argument("--points")
    s.add_argument("--scores")
    s.add_argument("--tasks")

    s = sub.add_parser("select", parents=[common], help="keyframe selection on a bundle")
    s.add_argument("--bundle", required=True)
    s.add_argument("--scores")
    s.add_argument("--k", type=int)

    s = sub.add_parser("query", parents=[common], help="BEV pose query; exit 0 on hit, 3 on miss")
    s.add_argument("--bundle", required=True)
    s.add_argument("--camera", required=True, help='[x, y, r] or {"camera": [x, y, r]}')

    s = sub.add_parser("episode", parents=[common], help="run scripted pose-query episodes")
    s.add_argument("--bundle", required=True)
    s.add_argument("--policy", required=True, choices=["oracle", "random", "no-tool"])
    s.add_argument("--group-size", type=int, default=4)
    s.add_argument("--tasks")

    s = sub.add_parser("reward", parents=[common], help="re-score a trajectory log")
    s.add_argument("--log", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic room scan")
    s.add_argument("--frames", type=int, default=500)
    s.add_argument("--width", type=int, default=192)
    s.add_argument("--height", type=int, default=144)
    return p


def _config(args, fallback: Config | None = None) -> Config:
    if args.config:
        return load_config(args.config)
    return fallback if fallback is not None else Config()


def _emit(obj) -> None:
    sys.stdout.write(io.dumps(obj))


def _require_out(args, parser) -> Path:
    if not args.out:
        parser.error(f"{args.command} requires --out")
    return Path(args.out)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args, parser)
    except (io.InputError, DegenerateCloudError, ValueError, FloatingPointError) as exc:
        print(f"bevground {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _dispatch(args, parser) -> int:
    cmd = args.command
    if cmd == "preprocess":
        out = _require_out(args, parser)
        preprocess_scene(out, args.trajectory, args.depth_dir, args.points, args.scores, args.tasks,
                         _config(args))
        _emit({"bundle": str(out)})
        return EXIT_OK

    if cmd == "select":
        bundle = io.read_bundle(args.bundle)
        cfg = _config(args, bundle.config)
        if args.k is not None:
            cfg = cfg.replace(k=args.k)
        result = select_from_bundle(bundle, args.scores, cfg)
        if args.out:
            io.write_json(Path(args.out) / "selection.json", result)
        _emit(result)
        return EXIT_OK

    if cmd == "query":
        bundle = io.read_bundle(args.bundle)
        try:
            res, payload = query_bundle(bundle, args.camera, _config(args, bundle.config))
        except (ValueError, KeyError, TypeError) as exc:
            print(f"bevground query: error: malformed camera: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if args.out:
            io.write_json(Path(args.out) / "query.json", payload)
        _emit(payload)
        return EXIT_OK if res.hit else EXIT_MISS

    if cmd == "episode":
        bundle = io.read_bundle(args.bundle)
        records, summary = run_episodes(bundle, args.policy, args.seed, args.group_size, args.tasks,
                                        _config(args, bundle.config))
        if args.out:
            io.write_jsonl(Path(args.out) / "trajectories.jsonl", records)
            io.write_json(Path(args.out) / "summary.json", summary)
        _emit(summary)
        return EXIT_OK

    if cmd == "reward":
        records, summary = rescore_log(args.log, load_config(args.config) if args.config else None)
        if args.out:
            io.write_jsonl(Path(args.out) / "trajectories.jsonl", records)
            io.write_json(Path(args.out) / "summary.json", summary)
        _emit(summary)
        return EXIT_OK

    if cmd == "synth":
        from .synthetic import make_room

        out = _require_out(args, parser)
        room = make_room(args.frames, args.width, args.height, seed=args.seed)
        io.write_trajectory(out / "trajectory.jsonl", room.poses)
        io.write_depth_dir(out / "depth", room.intrinsics, room.depths)
        io.write_scores(out / "scores.json", room.scores)
        io.write_json(out / "tasks.json", room.tasks)
        io.write_json(out / "ground_truth.json", {"yaw_rad": room.yaw, "up": room.up,
                                                  "world_rotation": room.world_rotation,
                                                  "world_translation": room.world_translation})
        _emit({"scene": str(out), "frames": len(room.poses)})
        return EXIT_OK

    parser.error(f"unknown command {cmd}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
