"""Model inputs: observation features, pose encodings and batched context arrays."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.acoustics.dsp import stft_mag
from src.acoustics.geometry import DepthScan, Pose, Query, normalize_point, normalize_pose
from src.acoustics.simulator import BinauralRir
from src.config.models import ModelConfig, StftConfig
from src.errors import PreconditionError, ShapeError

POSE_ATTRIBUTES = 4  # dx, dy, sin(dtheta), cos(dtheta)
SOURCE_ATTRIBUTES = 2  # dx, dy


@dataclass(frozen=True)
class Observation:
    depth: DepthScan
    echo: BinauralRir
    pose: Pose


@dataclass(frozen=True)
class ObservationFeatures:
    """An observation reduced to the vectors the encoders consume."""

    depth: np.ndarray = field(repr=False)  # (R,)
    echo: np.ndarray = field(repr=False)  # (2 * bands * time_bins,)
    pose: Pose = field(default_factory=lambda: Pose(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class ContextArrays:
    depth: np.ndarray  # (N, R)
    echo: np.ndarray  # (N, E)
    pose: np.ndarray  # (N, 16 * POSE_ATTRIBUTES)

    @property
    def size(self) -> int:
        return self.depth.shape[0]


def frequencies(n: int) -> np.ndarray:
    """Geometric angular frequencies pi * 2**(k - 3), k = 0..n-1."""
    return math.pi * np.power(2.0, np.arange(n) - 3.0)


def sinusoidal_encode(values: np.ndarray | Sequence[float], n_frequencies: int = 8) -> np.ndarray:
    """(..., A) attributes -> (..., 2 * n_frequencies * A), [sin..., cos...] per attribute."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise PreconditionError("sinusoidal_encode needs finite inputs")
    phase = v[..., :, None] * frequencies(n_frequencies)
    enc = np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)
    return enc.reshape(*v.shape[:-1], v.shape[-1] * 2 * n_frequencies)


def pose_attributes(pose: Pose, anchor: Pose) -> np.ndarray:
    offset = normalize_pose(pose, anchor)
    return np.array([offset.dx, offset.dy, math.sin(offset.dtheta), math.cos(offset.dtheta)])


def encode_pose(pose: Pose, anchor: Pose, n_frequencies: int = 8) -> np.ndarray:
    return sinusoidal_encode(pose_attributes(pose, anchor), n_frequencies)


def encode_query_pose(query: Query, anchor: Pose, n_frequencies: int = 8) -> np.ndarray:
    source = sinusoidal_encode(np.asarray(normalize_point(query.source, anchor)), n_frequencies)
    return np.concatenate([source, encode_pose(query.receiver, anchor, n_frequencies)])


def depth_features(scan: DepthScan) -> np.ndarray:
    return np.log1p(np.asarray(scan.ranges, dtype=np.float64))


def echo_features(echo: BinauralRir, stft_cfg: StftConfig, bands: int = 16, time_bins: int = 8) -> np.ndarray:
    """Log energies pooled on a coarse band x time grid, per channel, flattened."""
    power = np.square(stft_mag(echo, stft_cfg).data)  # (2, F, T)
    if power.shape[1] < bands or power.shape[2] < time_bins:
        raise ShapeError(f"echo spectrogram {power.shape} is smaller than the {bands}x{time_bins} pooling grid")
    pooled = np.stack(
        [
            np.stack([cell.sum(axis=(-2, -1)) for cell in np.array_split(band, time_bins, axis=2)], axis=-1)
            for band in np.array_split(power, bands, axis=1)
        ],
        axis=1,
    )  # (2, bands, time_bins)
    return np.log1p(pooled).reshape(-1)


def observation_features(obs: Observation, stft_cfg: StftConfig, model_cfg: ModelConfig) -> ObservationFeatures:
    return ObservationFeatures(
        depth=depth_features(obs.depth),
        echo=echo_features(obs.echo, stft_cfg, model_cfg.echo_bands, model_cfg.echo_time_bins),
        pose=obs.pose,
    )


def context_arrays(
    features: Sequence[ObservationFeatures], anchor: Pose | None = None, n_frequencies: int = 8
) -> ContextArrays:
    """Stack a context; poses are expressed relative to ``anchor`` (default: the first observation)."""
    if not features:
        raise PreconditionError("a context needs at least one observation")
    anchor = anchor if anchor is not None else features[0].pose
    return ContextArrays(
        depth=np.stack([f.depth for f in features]),
        echo=np.stack([f.echo for f in features]),
        pose=np.stack([encode_pose(f.pose, anchor, n_frequencies) for f in features]),
    )


def query_arrays(queries: Sequence[Query], anchor: Pose, n_frequencies: int = 8) -> np.ndarray:
    """(Q, 16 * (SOURCE_ATTRIBUTES + POSE_ATTRIBUTES)) query encodings."""
    return np.stack([encode_query_pose(q, anchor, n_frequencies) for q in queries])
