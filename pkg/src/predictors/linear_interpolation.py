from __future__ import annotations

from typing import Sequence

import numpy as np

from src.acoustics.dsp import LOG, Spectrogram
from src.acoustics.geometry import Pose, Query
from src.errors import ConfigurationError, PreconditionError

from .base import Prediction, PredictionRequest, PredictorBase
from .nearest_neighbor import receiver_distances

N_NEIGHBORS = 4
MIN_DISTANCE = 1e-6
WEIGHTINGS = ("inverse_distance", "uniform")


def interpolation_weights(distances: np.ndarray, weighting: str = "inverse_distance") -> np.ndarray:
    if weighting == "uniform":
        weights = np.ones_like(distances)
    elif weighting == "inverse_distance":
        weights = 1.0 / np.maximum(distances, MIN_DISTANCE)
    else:
        raise ConfigurationError(f"unknown interpolation weighting '{weighting}'")
    return weights / weights.sum()


def linear_interp_predict(
    poses: Sequence[Pose],
    echoes: Sequence[Spectrogram],
    query: Query,
    weighting: str = "inverse_distance",
    n_neighbors: int = N_NEIGHBORS,
) -> Spectrogram:
    """Blend of the nearest min(4, N) echoes, mixed in the linear-magnitude domain."""
    if not poses:
        raise PreconditionError("linear interpolation needs at least one observation")
    distances = receiver_distances(poses, query)
    k = min(n_neighbors, len(poses))
    nearest = np.argsort(distances, kind="stable")[:k]
    weights = interpolation_weights(distances[nearest], weighting)
    for i in nearest:
        echoes[i].require(LOG)
    linear = sum(w * np.expm1(echoes[i].data) for w, i in zip(weights, nearest))
    return Spectrogram(np.log1p(np.maximum(linear, 0.0)), echoes[nearest[0]].cfg, LOG)


class LinearInterpolationPredictor(PredictorBase):
    name = "linear_interpolation"

    def __init__(self, weighting: str = "inverse_distance", **_options) -> None:
        if weighting not in WEIGHTINGS:
            raise ConfigurationError(f"unknown interpolation weighting '{weighting}'")
        self.weighting = weighting

    def describe(self) -> dict:
        return {"predictor": self.name, "weighting": self.weighting}

    def predict(self, request: PredictionRequest) -> list[Prediction]:
        size = request.context_size
        entries = request.context.observations[:size] if size > 0 else request.context.observations
        echoes = request.dataset.echo_spectrograms(request.context, size)
        poses = [o.pose for o in entries]
        return [Prediction(linear_interp_predict(poses, echoes, q.query, self.weighting)) for q in request.queries]
