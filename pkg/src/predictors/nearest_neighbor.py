from __future__ import annotations

from typing import Sequence

import numpy as np

from src.acoustics.dsp import LOG, Spectrogram
from src.acoustics.geometry import Pose, Query
from src.errors import PreconditionError

from .base import Prediction, PredictionRequest, PredictorBase


def receiver_distances(poses: Sequence[Pose], query: Query) -> np.ndarray:
    positions = np.array([[p.x, p.y] for p in poses], dtype=np.float64)
    return np.hypot(positions[:, 0] - query.receiver.x, positions[:, 1] - query.receiver.y)


def nearest_neighbor_predict(poses: Sequence[Pose], echoes: Sequence[Spectrogram], query: Query) -> Spectrogram:
    """Echo of the observation closest to the query receiver; the lowest index wins ties."""
    if not poses:
        raise PreconditionError("nearest neighbour needs at least one observation")
    index = int(np.argmin(receiver_distances(poses, query)))
    echo = echoes[index]
    echo.require(LOG)
    return echo


class NearestNeighborPredictor(PredictorBase):
    name = "nearest_neighbor"

    def __init__(self, **_options) -> None:
        pass

    def predict(self, request: PredictionRequest) -> list[Prediction]:
        size = request.context_size
        entries = request.context.observations[:size] if size > 0 else request.context.observations
        echoes = request.dataset.echo_spectrograms(request.context, size)
        poses = [o.pose for o in entries]
        return [Prediction(nearest_neighbor_predict(poses, echoes, q.query)) for q in request.queries]
