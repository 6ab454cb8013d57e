"""Shoebox image-source simulator with a two-ear receiver.

Image sources are enumerated up to ``max_reflection_order`` total wall hits,
attenuated by the product of reflection coefficients ``sqrt(1 - alpha)`` and by
``1 / max(d, min_distance)`` spreading, and placed on the time axis with a
Hann-windowed sinc fractional-delay kernel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.config.models import SimConfig
from src.errors import ConfigurationError, PreconditionError, ShapeError

from .geometry import Pose, RoomSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinauralRir:
    samples: np.ndarray = field(repr=False)  # (2, L): left, right
    sample_rate: int

    def __post_init__(self) -> None:
        data = np.asarray(self.samples, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != 2 or data.shape[1] == 0:
            raise ShapeError(f"binaural RIR must have shape (2, L>0), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("binaural RIR contains non-finite samples")
        object.__setattr__(self, "samples", data)

    @property
    def left(self) -> np.ndarray:
        return self.samples[0]

    @property
    def right(self) -> np.ndarray:
        return self.samples[1]

    @property
    def length(self) -> int:
        return int(self.samples.shape[1])

    def energy(self) -> float:
        return float(np.sum(self.samples**2))

    def swapped(self) -> BinauralRir:
        return BinauralRir(self.samples[::-1].copy(), self.sample_rate)

    def scaled(self, factor: float) -> BinauralRir:
        return BinauralRir(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class ImageSources:
    positions: np.ndarray  # (M, 3)
    gains: np.ndarray  # (M,) products of reflection coefficients
    orders: np.ndarray  # (M,) total wall hits


def _axis_images(coord: float, length: float, m: np.ndarray) -> np.ndarray:
    even = (m % 2) == 0
    return np.where(even, coord + m * length, -coord + (m + 1) * length)


def _axis_hits(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(lower-wall hits, upper-wall hits) for image indices m."""
    a = np.abs(m)
    upper = np.where(m >= 0, (a + 1) // 2, a // 2)
    lower = np.where(m >= 0, a // 2, (a + 1) // 2)
    return lower, upper


def image_sources(room: RoomSpec, source: Sequence[float], max_order: int) -> ImageSources:
    """Enumerate image sources with |mx| + |my| + |mz| <= max_order."""
    if max_order < 0:
        raise ConfigurationError(f"max_reflection_order must be >= 0, got {max_order}")
    r = np.arange(-max_order, max_order + 1)
    mx, my, mz = (g.ravel() for g in np.meshgrid(r, r, r, indexing="ij"))
    order = np.abs(mx) + np.abs(my) + np.abs(mz)
    keep = order <= max_order
    mx, my, mz, order = mx[keep], my[keep], mz[keep], order[keep]

    ox, oy = room.origin
    sx, sy, sz = source[0] - ox, source[1] - oy, source[2]
    positions = np.stack(
        [
            _axis_images(sx, room.width, mx) + ox,
            _axis_images(sy, room.depth, my) + oy,
            _axis_images(sz, room.height, mz),
        ],
        axis=1,
    )

    beta = room.reflection_coefficients
    gains = np.ones(mx.shape[0])
    for axis, m in enumerate((mx, my, mz)):
        lower, upper = _axis_hits(m)
        gains *= np.power(beta[2 * axis], lower) * np.power(beta[2 * axis + 1], upper)

    nonzero = gains > 0
    return ImageSources(positions[nonzero], gains[nonzero], order[nonzero])


def fractional_delay_kernel(delays: np.ndarray, taps: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample indices and Hann-windowed sinc weights, both shaped (len(delays), taps)."""
    half = taps // 2
    base = np.floor(delays).astype(np.int64)
    idx = base[:, None] + np.arange(-half, half + 1)[None, :]
    x = idx - delays[:, None]
    weights = np.sinc(x) * 0.5 * (1.0 + np.cos(2.0 * np.pi * x / taps))
    return idx, weights


def _render(
    delays: np.ndarray, amplitudes: np.ndarray, length: int, taps: int
) -> np.ndarray:
    half = taps // 2
    live = (delays - half < length) & (amplitudes != 0)
    idx, weights = fractional_delay_kernel(delays[live], taps)
    weights = weights * amplitudes[live][:, None]
    valid = (idx >= 0) & (idx < length)
    return np.bincount(idx[valid], weights=weights[valid], minlength=length)[:length]


def ear_positions(receiver: Pose, height: float, baseline: float) -> tuple[np.ndarray, np.ndarray]:
    left_axis = np.array([-math.sin(receiver.theta), math.cos(receiver.theta), 0.0])
    center = np.array([receiver.x, receiver.y, height])
    return center + 0.5 * baseline * left_axis, center - 0.5 * baseline * left_axis


def ear_gains(directions: np.ndarray, receiver: Pose, exponent: float) -> tuple[np.ndarray, np.ndarray]:
    """Cardioid-power gains per ear for unit arrival directions seen from the head center."""
    left_axis = np.array([-math.sin(receiver.theta), math.cos(receiver.theta), 0.0])
    lateral = directions @ left_axis
    g_left = np.power(np.clip(0.5 * (1.0 + lateral), 0.0, 1.0), exponent)
    g_right = np.power(np.clip(0.5 * (1.0 - lateral), 0.0, 1.0), exponent)
    return g_left, g_right


def _check_inside(room: RoomSpec, x: float, y: float, what: str) -> None:
    if not room.contains(x, y):
        raise PreconditionError(f"{what} ({x:.3f}, {y:.3f}) lies outside the room footprint")


def simulate_rir(
    room: RoomSpec,
    source: Sequence[float],
    receiver: Pose,
    cfg: SimConfig,
) -> BinauralRir:
    _check_inside(room, source[0], source[1], "source")
    _check_inside(room, receiver.x, receiver.y, "receiver")

    sr = cfg.sample_rate
    length = cfg.rir_samples
    src = (float(source[0]), float(source[1]), room.agent_height)
    images = image_sources(room, src, cfg.max_reflection_order)

    head = np.array([receiver.x, receiver.y, room.agent_height])
    to_image = images.positions - head
    head_dist = np.linalg.norm(to_image, axis=1)
    near = head_dist < cfg.min_distance
    directions = to_image / np.where(near, 1.0, head_dist)[:, None]
    g_left, g_right = ear_gains(directions, receiver, cfg.ear_directivity_exponent)
    g_left = np.where(near, 1.0, g_left)
    g_right = np.where(near, 1.0, g_right)

    direct = float(np.hypot(src[0] - receiver.x, src[1] - receiver.y))
    direct_delay = max(direct, cfg.min_distance) / cfg.speed_of_sound * sr
    if direct_delay >= length - 1:
        raise ConfigurationError(
            f"rir_length {cfg.rir_length} s cannot hold the direct path ({direct_delay / sr:.4f} s)"
        )

    channels = []
    for ear, gain in zip(ear_positions(receiver, room.agent_height, cfg.ear_baseline), (g_left, g_right)):
        dist = np.maximum(np.linalg.norm(images.positions - ear, axis=1), cfg.min_distance)
        delays = dist / cfg.speed_of_sound * sr
        channels.append(_render(delays, images.gains * gain / dist, length, cfg.fractional_delay_taps))
    return BinauralRir(np.stack(channels), sr)


def simulate_echo(room: RoomSpec, pose: Pose, cfg: SimConfig) -> BinauralRir:
    """Co-located source and receiver at the pose."""
    return simulate_rir(room, (pose.x, pose.y), pose, cfg)


def simulate_mono_rir(
    room: RoomSpec,
    source: Sequence[float],
    receiver: Sequence[float],
    cfg: SimConfig,
) -> np.ndarray:
    """Omnidirectional source to a single omnidirectional microphone, both 3D points."""
    images = image_sources(room, source, cfg.max_reflection_order)
    dist = np.maximum(np.linalg.norm(images.positions - np.asarray(receiver, dtype=np.float64), axis=1), cfg.min_distance)
    delays = dist / cfg.speed_of_sound * cfg.sample_rate
    return _render(delays, images.gains / dist, cfg.rir_samples, cfg.fractional_delay_taps)
