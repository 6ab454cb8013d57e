from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.config.models import SimConfig
from src.errors import LocalizationError

from .geometry import Pose
from .simulator import BinauralRir

logger = logging.getLogger(__name__)

_ONSET_FRACTION = 0.5
_NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class DirectArrival:
    time: float  # seconds
    amplitude: float


@dataclass(frozen=True)
class SourceEstimate:
    x: float
    y: float
    distance: float
    bearing: float  # radians from the receiver heading, positive to the left
    used_itd: bool

    def error_to(self, source: tuple[float, float]) -> float:
        return math.hypot(self.x - source[0], self.y - source[1])


def direct_arrival(x: np.ndarray, sample_rate: int, noise_floor: float = _NOISE_FLOOR) -> DirectArrival:
    """First strong peak: first sample reaching half the maximum, climbed to its local max and
    refined with a parabola through the neighbours."""
    mag = np.abs(np.asarray(x, dtype=np.float64))
    peak = float(mag.max()) if mag.size else 0.0
    if not np.isfinite(peak) or peak <= noise_floor:
        raise LocalizationError(f"no direct-path peak above the noise floor ({peak:.3g})")
    i = int(np.argmax(mag >= _ONSET_FRACTION * peak))
    while i + 1 < mag.shape[0] and mag[i + 1] > mag[i]:
        i += 1
    offset, amplitude = 0.0, mag[i]
    if 0 < i < mag.shape[0] - 1:
        a, b, c = mag[i - 1], mag[i], mag[i + 1]
        denom = a - 2.0 * b + c
        if denom < 0:
            offset = 0.5 * (a - c) / denom
            amplitude = b - 0.25 * (a - c) * offset
    return DirectArrival((i + offset) / sample_rate, float(amplitude))


def localize_source(rir: BinauralRir, receiver: Pose, cfg: SimConfig) -> SourceEstimate:
    """Planar source estimate from the binaural direct path.

    Range comes from the mean arrival time. The bearing magnitude comes from
    the interaural delay when it spans at least one sample, otherwise from the
    level difference inverted through the ear directivity; the side is always
    taken from the level difference. Sources are assumed in front.
    """
    sr = rir.sample_rate
    left = direct_arrival(rir.left, sr)
    right = direct_arrival(rir.right, sr)
    c = cfg.speed_of_sound
    baseline = cfg.ear_baseline

    delay = left.time - right.time  # > 0 when the right ear hears it first
    max_delay = baseline / c + 1.0 / sr
    consistent = abs(delay) <= max_delay

    level_sin = 0.0
    if cfg.ear_directivity_exponent > 0 and left.amplitude > 0 and right.amplitude > 0:
        ratio = (left.amplitude / right.amplitude) ** (1.0 / cfg.ear_directivity_exponent)
        level_sin = (ratio - 1.0) / (ratio + 1.0)
    side = math.copysign(1.0, level_sin) if level_sin != 0 else -math.copysign(1.0, delay) if delay else 1.0

    used_itd = consistent and baseline > 0 and abs(delay) * sr >= 1.0
    if used_itd:
        magnitude = min(1.0, c * abs(delay) / baseline)
    else:
        magnitude = min(1.0, abs(level_sin))
    bearing = side * math.asin(magnitude)

    if consistent:
        distance = c * 0.5 * (left.time + right.time)
    else:
        distance = c * (left.time if left.amplitude >= right.amplitude else right.time)

    heading = receiver.theta + bearing
    x = receiver.x + distance * math.cos(heading)
    y = receiver.y + distance * math.sin(heading)
    logger.debug("Localized at %.2f m, bearing %.1f deg (itd=%s)", distance, math.degrees(bearing), used_itd)
    return SourceEstimate(x, y, distance, bearing, used_itd)
