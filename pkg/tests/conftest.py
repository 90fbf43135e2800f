from pathlib import Path

import numpy as np
import pytest

from bevground.cli import main
from bevground.synthetic import make_room

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def small_room():
    return make_room(n_frames=60, width=64, height=48, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_scene(out, frames, width, height, seed=0):
    assert main(["synth", "--out", str(out), "--frames", str(frames), "--width", str(width),
                 "--height", str(height), "--seed", str(seed)]) == 0
    return out


def build_bundle(scene, out):
    assert main(["preprocess", "--trajectory", str(scene / "trajectory.jsonl"), "--depth-dir", str(scene / "depth"),
                 "--scores", str(scene / "scores.json"), "--tasks", str(scene / "tasks.json"),
                 "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="session")
def small_scene(tmp_path_factory):
    return write_scene(tmp_path_factory.mktemp("small_scene"), 60, 64, 48, seed=1)


@pytest.fixture(scope="session")
def small_bundle(small_scene, tmp_path_factory):
    return build_bundle(small_scene, tmp_path_factory.mktemp("small_bundle"))


@pytest.fixture(scope="session")
def full_scene(tmp_path_factory):
    """The bundled synthetic room: 500 frames at 192x144, seed 0."""
    return write_scene(tmp_path_factory.mktemp("full_scene"), 500, 192, 144, seed=0)


@pytest.fixture(scope="session")
def full_bundle(full_scene, tmp_path_factory):
    return build_bundle(full_scene, tmp_path_factory.mktemp("full_bundle"))
