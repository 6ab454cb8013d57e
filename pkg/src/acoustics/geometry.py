from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from src.config.models import RoomGenConfig
from src.errors import ConfigurationError, InfeasibleError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Surface order used everywhere: x0, x1, y0, y1, floor, ceiling.
SURFACES = ("x0", "x1", "y0", "y1", "floor", "ceiling")


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi)."""
    return (angle + math.pi) % TWO_PI - math.pi


def as_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class RoomSpec:
    width: float
    depth: float
    height: float
    wall_absorption: tuple[float, ...]
    agent_height: float
    rng_seed: int = 0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if min(self.width, self.depth, self.height) <= 0:
            raise ConfigurationError(f"room dimensions must be positive: {self.width}x{self.depth}x{self.height}")
        if len(self.wall_absorption) != len(SURFACES):
            raise ConfigurationError(f"expected {len(SURFACES)} absorption coefficients, got {len(self.wall_absorption)}")
        if any(not 0 < a <= 1 for a in self.wall_absorption):
            raise ConfigurationError(f"absorption coefficients must lie in (0, 1]: {self.wall_absorption}")
        if not 0 < self.agent_height < self.height:
            raise ConfigurationError(f"agent_height {self.agent_height} must lie strictly inside (0, {self.height})")

    @property
    def x_bounds(self) -> tuple[float, float]:
        return (self.origin[0], self.origin[0] + self.width)

    @property
    def y_bounds(self) -> tuple[float, float]:
        return (self.origin[1], self.origin[1] + self.depth)

    @property
    def diagonal(self) -> float:
        """Planar footprint diagonal."""
        return math.hypot(self.width, self.depth)

    @property
    def reflection_coefficients(self) -> np.ndarray:
        return np.sqrt(1.0 - np.asarray(self.wall_absorption, dtype=np.float64))

    def contains(self, x: float, y: float) -> bool:
        x0, x1 = self.x_bounds
        y0, y1 = self.y_bounds
        return x0 < x < x1 and y0 < y < y1

    def translated(self, dx: float, dy: float) -> RoomSpec:
        return replace(self, origin=(self.origin[0] + dx, self.origin[1] + dy))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "depth": self.depth,
            "height": self.height,
            "wall_absorption": list(self.wall_absorption),
            "agent_height": self.agent_height,
            "rng_seed": self.rng_seed,
            "origin": list(self.origin),
        }

    @classmethod
    def from_dict(cls, data: dict) -> RoomSpec:
        return cls(
            width=float(data["width"]),
            depth=float(data["depth"]),
            height=float(data["height"]),
            wall_absorption=tuple(float(a) for a in data["wall_absorption"]),
            agent_height=float(data["agent_height"]),
            rng_seed=int(data.get("rng_seed", 0)),
            origin=tuple(float(v) for v in data.get("origin", (0.0, 0.0))),
        )


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(self.x - x, self.y - y)

    def translated(self, dx: float, dy: float) -> Pose:
        return Pose(self.x + dx, self.y + dy, self.theta)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta}

    @classmethod
    def from_dict(cls, data: dict) -> Pose:
        return cls(float(data["x"]), float(data["y"]), float(data.get("theta", 0.0)))


@dataclass(frozen=True)
class PoseOffset:
    """A pose expressed in an anchor's frame; dtheta in [-pi, pi)."""

    dx: float
    dy: float
    dtheta: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dtheta)


@dataclass(frozen=True)
class Query:
    source: tuple[float, float]
    receiver: Pose

    def to_dict(self) -> dict:
        return {"source": list(self.source), "receiver": self.receiver.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> Query:
        sx, sy = data["source"]
        return cls(source=(float(sx), float(sy)), receiver=Pose.from_dict(data["receiver"]))


@dataclass(frozen=True)
class DepthScan:
    ranges: np.ndarray = field(repr=False)
    fov: float

    @property
    def n_rays(self) -> int:
        return int(self.ranges.shape[0])


def sample_room(gen_cfg: RoomGenConfig, seed: int) -> RoomSpec:
    gen_cfg.validate()
    rng = np.random.default_rng(seed)
    width = float(rng.uniform(*gen_cfg.width_range))
    depth = float(rng.uniform(*gen_cfg.depth_range))
    height = float(rng.uniform(*gen_cfg.height_range))
    absorption = tuple(float(a) for a in rng.uniform(*gen_cfg.absorption_range, size=len(SURFACES)))
    room = RoomSpec(
        width=width,
        depth=depth,
        height=height,
        wall_absorption=absorption,
        agent_height=gen_cfg.agent_height,
        rng_seed=seed,
    )
    logger.debug("Sampled room %.2fx%.2fx%.2f (seed %d)", width, depth, height, seed)
    return room


def _interior(room: RoomSpec, clearance: float) -> tuple[float, float, float, float]:
    if clearance < 0:
        raise ConfigurationError(f"min_wall_clearance must be >= 0, got {clearance}")
    x0, x1 = room.x_bounds
    y0, y1 = room.y_bounds
    lo_x, hi_x = x0 + clearance, x1 - clearance
    lo_y, hi_y = y0 + clearance, y1 - clearance
    if hi_x <= lo_x or hi_y <= lo_y:
        raise InfeasibleError(
            f"clearance {clearance} m leaves no interior in a {room.width:.2f}x{room.depth:.2f} m room"
        )
    return lo_x, hi_x, lo_y, hi_y


def sample_points(
    room: RoomSpec, n: int, min_wall_clearance: float, seed: int | np.random.Generator
) -> np.ndarray:
    """n points uniform over the admissible interior, shape (n, 2)."""
    if n < 1:
        raise ConfigurationError(f"need at least one point, got n={n}")
    lo_x, hi_x, lo_y, hi_y = _interior(room, min_wall_clearance)
    rng = as_rng(seed)
    xs = rng.uniform(lo_x, hi_x, size=n)
    ys = rng.uniform(lo_y, hi_y, size=n)
    return np.stack([xs, ys], axis=1)


def sample_poses(
    room: RoomSpec, n: int, min_wall_clearance: float, seed: int | np.random.Generator
) -> list[Pose]:
    rng = as_rng(seed)
    points = sample_points(room, n, min_wall_clearance, rng)
    headings = rng.uniform(0.0, TWO_PI, size=n)
    return [Pose(float(x), float(y), float(t)) for (x, y), t in zip(points, headings)]


def ray_angles(theta: float, n_rays: int, fov: float) -> np.ndarray:
    return theta - fov / 2.0 + np.arange(n_rays) * (fov / (n_rays - 1))


def depth_scan(room: RoomSpec, pose: Pose, n_rays: int = 32, fov: float = math.pi / 2) -> DepthScan:
    if n_rays < 2:
        raise ConfigurationError(f"depth scan needs at least 2 rays, got {n_rays}")
    if not 0 < fov <= TWO_PI:
        raise ConfigurationError(f"fov must lie in (0, 2pi], got {fov}")

    angles = ray_angles(pose.theta, n_rays, fov)
    cos_a, sin_a = np.cos(angles), np.sin(angles)
    x0, x1 = room.x_bounds
    y0, y1 = room.y_bounds

    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(cos_a > 0, (x1 - pose.x) / cos_a, np.where(cos_a < 0, (x0 - pose.x) / cos_a, np.inf))
        ty = np.where(sin_a > 0, (y1 - pose.y) / sin_a, np.where(sin_a < 0, (y0 - pose.y) / sin_a, np.inf))
    tx = np.where(tx > 0, tx, np.inf)
    ty = np.where(ty > 0, ty, np.inf)
    ranges = np.minimum(tx, ty)
    return DepthScan(ranges=ranges, fov=float(fov))


def normalize_pose(pose: Pose, anchor: Pose) -> PoseOffset:
    dx, dy = normalize_point((pose.x, pose.y), anchor)
    return PoseOffset(dx, dy, wrap_angle(pose.theta - anchor.theta))


def normalize_point(point: Sequence[float], anchor: Pose) -> tuple[float, float]:
    """World point in the anchor's heading frame."""
    ox, oy = point[0] - anchor.x, point[1] - anchor.y
    c, s = math.cos(anchor.theta), math.sin(anchor.theta)
    return (c * ox + s * oy, -s * ox + c * oy)


def denormalize_point(offset: Sequence[float], anchor: Pose) -> tuple[float, float]:
    c, s = math.cos(anchor.theta), math.sin(anchor.theta)
    return (anchor.x + c * offset[0] - s * offset[1], anchor.y + s * offset[0] + c * offset[1])


def denormalize_pose(offset: PoseOffset, anchor: Pose) -> Pose:
    x, y = denormalize_point((offset.dx, offset.dy), anchor)
    return Pose(x, y, anchor.theta + offset.dtheta)
