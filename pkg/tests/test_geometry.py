import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from bevground.geometry import (
    GeometryParams,
    Pose,
    axis_angle_quat,
    matrix_to_quat,
    pose_affinity,
    pose_distance_sq,
    quat_to_matrix,
    rotation_geodesic,
)

IDENTITY = [1.0, 0.0, 0.0, 0.0]

quats = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.asarray(v) / np.linalg.norm(v))


def test_geodesic_examples():
    assert rotation_geodesic(IDENTITY, IDENTITY) == 0.0
    assert rotation_geodesic(IDENTITY, axis_angle_quat([0, 0, 1], math.pi / 2)) == pytest.approx(math.pi / 2)
    for axis in ([1, 0, 0], [0, 1, 0], [1, 2, 3]):
        assert rotation_geodesic(IDENTITY, axis_angle_quat(axis, math.pi)) == pytest.approx(math.pi)


def test_quaternion_matches_scipy():
    for seed in range(20):
        r = Rotation.random(random_state=seed)
        x, y, z, w = r.as_quat()
        np.testing.assert_allclose(quat_to_matrix([w, x, y, z]), r.as_matrix(), atol=1e-12)
        q = matrix_to_quat(r.as_matrix())
        np.testing.assert_allclose(quat_to_matrix(q), r.as_matrix(), atol=1e-12)


def test_quaternion_norm_guard():
    with pytest.raises(ValueError):
        Pose([1.01, 0, 0, 0], [0, 0, 0])
    p = Pose([1.0005, 0, 0, 0], [0, 0, 0])
    assert np.linalg.norm(p.rotation) == pytest.approx(1.0, abs=1e-12)


def test_pose_distance_examples():
    p = GeometryParams(sigma_t=1.0, beta=2.0)
    a = Pose(IDENTITY, [0, 0, 0], 0)
    assert pose_distance_sq(a, Pose(IDENTITY, [3, 4, 0], 1), p) == pytest.approx(25.0)
    b = Pose(axis_angle_quat([0, 0, 1], math.pi / 2), [0, 0, 0], 1)
    assert pose_distance_sq(a, b, p) == pytest.approx(math.pi**2)
    assert pose_distance_sq(a, a, p) == 0.0


def test_pose_affinity_examples():
    assert pose_affinity(0.0) == 1.0
    assert pose_affinity(25.0) == pytest.approx(3.727e-6, rel=1e-3)
    assert pose_affinity(1.0) == pytest.approx(0.60653, rel=1e-5)
    with pytest.raises(ValueError):
        pose_affinity(-1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        GeometryParams(sigma_t=0)
    with pytest.raises(ValueError):
        GeometryParams(beta=-1)


@settings(max_examples=200, deadline=None)
@given(quats, quats)
def test_geodesic_symmetry_and_double_cover(a, b):
    d = rotation_geodesic(a, b)
    assert 0.0 <= d <= math.pi
    assert d == pytest.approx(rotation_geodesic(b, a), abs=1e-9)
    assert d == pytest.approx(rotation_geodesic(-a, b), abs=1e-9)
    assert rotation_geodesic(a, a) == pytest.approx(0.0, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(quats, quats, st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_distance_symmetric_and_zero_iff_equal(a, b, t):
    i, j = Pose(a, t[:3]), Pose(b, t[3:])
    assert pose_distance_sq(i, j) == pytest.approx(pose_distance_sq(j, i), rel=1e-12, abs=1e-12)
    assert pose_distance_sq(i, Pose(-a, t[:3])) == pytest.approx(0.0, abs=1e-10)


@given(st.floats(0, 100), st.floats(0, 100))
def test_affinity_monotone(x, y):
    if x < y:
        assert pose_affinity(x) >= pose_affinity(y)
    assert 0.0 < pose_affinity(x) <= 1.0
