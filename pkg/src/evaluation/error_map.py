"""Prediction error as a function of source location for a fixed receiver."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.acoustics.analysis import stft_error
from src.acoustics.dsp import log_spectrogram
from src.acoustics.geometry import Pose, Query, RoomSpec
from src.acoustics.simulator import simulate_rir
from src.config.manager import write_json_atomic
from src.data.dataset import RirDataset
from src.data.manifest import ContextEntry, QueryEntry
from src.errors import ConfigurationError, DatasetError, PreconditionError
from src.predictors.base import PredictionRequest, PredictorBase
from src.predictors.registry import PredictorRegistry
from src.services.worker_pool import run_ordered

logger = logging.getLogger(__name__)

MAP_FIELDS = ("source_x", "source_y", "stft_error")


def source_grid(room: RoomSpec, step: float, clearance: float) -> np.ndarray:
    """Grid points over the footprint shrunk by clearance, row-major in y then x, shape (n, 2)."""
    if not step > 0:
        raise ConfigurationError(f"grid step must be positive, got {step}")
    x0, x1 = room.x_bounds
    y0, y1 = room.y_bounds
    lo_x, hi_x, lo_y, hi_y = x0 + clearance, x1 - clearance, y0 + clearance, y1 - clearance
    if hi_x < lo_x or hi_y < lo_y:
        raise PreconditionError(f"clearance {clearance} m leaves no grid in room {room.width:.2f}x{room.depth:.2f}")
    xs = lo_x + step * np.arange(int(np.floor((hi_x - lo_x) / step + 1e-9)) + 1)
    ys = lo_y + step * np.arange(int(np.floor((hi_y - lo_y) / step + 1e-9)) + 1)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass
class ErrorMap:
    context_id: str
    receiver: Pose
    points: np.ndarray = field(repr=False)  # (n, 2)
    values: np.ndarray = field(repr=False)  # (n,)
    metadata: dict = field(default_factory=dict)

    @property
    def vmin(self) -> float:
        return float(np.min(self.values))

    @property
    def vmax(self) -> float:
        return float(np.max(self.values))

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    def value_at(self, x: float, y: float) -> float:
        """Error at the grid point closest to (x, y)."""
        d = np.hypot(self.points[:, 0] - x, self.points[:, 1] - y)
        return float(self.values[int(np.argmin(d))])

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(MAP_FIELDS)
        for (x, y), v in zip(self.points, self.values):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(v))])
        return buffer.getvalue()

    def to_dict(self) -> dict:
        return {
            **self.metadata,
            "context_id": self.context_id,
            "receiver": self.receiver.to_dict(),
            "n_points": int(self.values.shape[0]),
            "min": self.vmin,
            "max": self.vmax,
            "median": self.median,
        }

    def save(self, directory: Path, stem: str = "error_map") -> tuple[Path, Path]:
        directory = Path(directory)
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.json"
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp = csv_path.with_suffix(".csv.tmp")
            tmp.write_text(self.csv_text(), encoding="utf-8")
            tmp.replace(csv_path)
            write_json_atomic(json_path, self.to_dict())
        except OSError as exc:
            raise DatasetError(f"cannot write error map: {exc}", directory) from exc
        return csv_path, json_path


def compute_error_map(
    dataset: RirDataset,
    predictor: PredictorBase,
    context: ContextEntry,
    receiver: Pose,
    step: float,
    clearance: float | None = None,
    context_size: int = 0,
    workers: int = 0,
) -> ErrorMap:
    """Ground truth for every grid source is simulated in memory; queries carry no target file,
    so predictors that read targets cannot be mapped."""
    room = dataset.manifest.room(context.room_id).spec
    if not room.contains(receiver.x, receiver.y):
        raise PreconditionError(f"receiver ({receiver.x:.2f}, {receiver.y:.2f}) lies outside room {context.room_id}")
    clearance = dataset.manifest.dataset.min_wall_clearance if clearance is None else clearance
    points = source_grid(room, step, clearance)
    queries = [
        QueryEntry(f"{context.context_id}_map_{i:05d}", Query((float(x), float(y)), receiver), "")
        for i, (x, y) in enumerate(points)
    ]
    logger.info("Error map over %d sources in %s", len(queries), context.room_id)
    predictions = PredictorRegistry.run(predictor, PredictionRequest(dataset, context, queries, context_size))

    def target(index: int):
        return log_spectrogram(simulate_rir(room, points[index], receiver, dataset.sim), dataset.stft)

    targets = run_ordered(target, range(len(points)), workers, label="source")
    values = np.array([stft_error(p.spectrogram, t) for p, t in zip(predictions, targets)])
    meta = {**predictor.describe(), "room_id": context.room_id, "step": step, "clearance": clearance}
    return ErrorMap(context.context_id, receiver, points, values, meta)
