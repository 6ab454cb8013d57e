from __future__ import annotations

from .base import Prediction, PredictionRequest, PredictorBase


class GroundTruthPredictor(PredictorBase):
    """Returns the true RIRs; the upper-bound arm of every metric."""

    name = "ground_truth"

    def __init__(self, **_options) -> None:
        pass

    def predict(self, request: PredictionRequest) -> list[Prediction]:
        dataset = request.dataset
        return [Prediction(dataset.target_spectrogram(q), dataset.target_rir(q)) for q in request.queries]
