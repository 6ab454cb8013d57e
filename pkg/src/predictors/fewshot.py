from __future__ import annotations

import logging
from pathlib import Path

from src.acoustics.dsp import LOG, Spectrogram
from src.errors import ConfigurationError
from src.learning.checkpoint import Checkpoint, checkpoint_hash, load_checkpoint

from .base import Prediction, PredictionRequest, PredictorBase

logger = logging.getLogger(__name__)


class FewShotPredictor(PredictorBase):
    """Trained few-shot model; reads only context inputs and query poses."""

    name = "fewshot"

    def __init__(self, checkpoint: Path | Checkpoint | None = None, **_options) -> None:
        if checkpoint is None:
            raise ConfigurationError("the few-shot predictor needs a checkpoint")
        self.checkpoint = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(Path(checkpoint))
        if self.checkpoint.model.cfg.head != "spectrogram":
            raise ConfigurationError("checkpoint predicts acoustic parameters; use the analytical_rir predictor")
        self.checkpoint.model.eval()

    def describe(self) -> dict:
        return {
            "predictor": self.name,
            "checkpoint": str(self.checkpoint.path),
            "checkpoint_sha256": checkpoint_hash(self.checkpoint.path),
            "ablation": self.checkpoint.ablation,
            "step": self.checkpoint.step,
        }

    def predict(self, request: PredictionRequest) -> list[Prediction]:
        dataset = request.dataset
        model = self.checkpoint.model
        dataset.check_compatible(model.cfg)
        size = request.context_size or self.checkpoint.context_size
        n_obs = len(request.context.observations)
        indices = list(range(min(size, n_obs))) if size > 0 else None
        arrays, anchor = dataset.context_arrays(request.context, model.cfg, indices)
        raw = model.predict(arrays, dataset.query_arrays(request.queries, anchor, model.cfg), self.checkpoint.ablation)
        logger.debug("Predicted %d queries for %s", len(request.queries), request.context.context_id)
        return [Prediction(Spectrogram(spec, dataset.stft, LOG)) for spec in raw]
