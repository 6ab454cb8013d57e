import math

import numpy as np
import pytest

from src.acoustics.geometry import DepthScan, Pose, Query
from src.acoustics.simulator import BinauralRir
from src.errors import PreconditionError, ShapeError
from src.learning.features import (
    POSE_ATTRIBUTES,
    SOURCE_ATTRIBUTES,
    ObservationFeatures,
    context_arrays,
    depth_features,
    echo_features,
    encode_pose,
    pose_attributes,
    query_arrays,
    sinusoidal_encode,
)


def rotate(pose: Pose, angle: float) -> Pose:
    c, s = math.cos(angle), math.sin(angle)
    return Pose(c * pose.x - s * pose.y, s * pose.x + c * pose.y, pose.theta + angle)


def test_sinusoidal_layout():
    enc = sinusoidal_encode([[0.0, 1.0]], n_frequencies=3)
    assert enc.shape == (1, 12)
    # First attribute is zero: sines vanish, cosines are one.
    np.testing.assert_allclose(enc[0, :3], 0.0)
    np.testing.assert_allclose(enc[0, 3:6], 1.0)
    np.testing.assert_allclose(enc[0, 6:9], np.sin(math.pi * np.array([0.125, 0.25, 0.5])))


def test_sinusoidal_rejects_non_finite():
    with pytest.raises(PreconditionError):
        sinusoidal_encode([np.nan, 1.0])


def test_anchor_attributes_are_identity(pose):
    np.testing.assert_allclose(pose_attributes(pose, pose), [0.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_pose_encoding_is_rigid_motion_invariant(pose):
    other = Pose(3.1, 0.4, 4.0)
    a = encode_pose(other, pose)
    for angle in (0.7, -2.0):
        moved = encode_pose(rotate(other, angle).translated(5.0, -1.0), rotate(pose, angle).translated(5.0, -1.0))
        np.testing.assert_allclose(a, moved, atol=1e-9)


def test_query_encoding_width(pose):
    queries = [Query((1.0, 2.0), Pose(2.0, 2.0, 0.3)), Query((0.5, 0.5), pose)]
    enc = query_arrays(queries, pose, n_frequencies=4)
    assert enc.shape == (2, 2 * 4 * (SOURCE_ATTRIBUTES + POSE_ATTRIBUTES))


def test_depth_features_are_log_ranges():
    scan = DepthScan(np.array([0.0, 1.0, math.e - 1.0]), math.pi / 2)
    np.testing.assert_allclose(depth_features(scan), [0.0, math.log(2.0), 1.0])


def test_echo_features_pool_to_grid(stft_cfg, rng):
    echo = BinauralRir(rng.standard_normal((2, 2000)), 8000)
    feats = echo_features(echo, stft_cfg, bands=4, time_bins=5)
    assert feats.shape == (2 * 4 * 5,)
    assert np.all(feats >= 0)
    with pytest.raises(ShapeError):
        echo_features(echo, stft_cfg, bands=100, time_bins=5)


def test_context_arrays_default_anchor_is_first(rng):
    feats = [
        ObservationFeatures(rng.random(8), rng.random(4), Pose(1.0, 1.0, 0.5)),
        ObservationFeatures(rng.random(8), rng.random(4), Pose(2.0, 3.0, 1.5)),
    ]
    arrays = context_arrays(feats, n_frequencies=2)
    assert arrays.size == 2
    assert arrays.pose.shape == (2, 2 * 2 * POSE_ATTRIBUTES)
    np.testing.assert_allclose(arrays.pose[0], encode_pose(feats[0].pose, feats[0].pose, 2))
    with pytest.raises(PreconditionError):
        context_arrays([])
