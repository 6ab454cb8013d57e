from __future__ import annotations

import logging
from typing import Callable

from src.errors import ConfigurationError

from .base import Prediction, PredictionRequest, PredictorBase

logger = logging.getLogger(__name__)


class PredictorRegistry:
    def __init__(self) -> None:
        self._factories: dict[str, Callable[..., PredictorBase]] = {}

    def register(self, kind: str, factory: Callable[..., PredictorBase]) -> None:
        self._factories[kind] = factory
        logger.debug("Registered predictor: %s", kind)

    def available(self) -> list[str]:
        return sorted(self._factories)

    def create(self, kind: str, **options) -> PredictorBase:
        factory = self._factories.get(kind)
        if factory is None:
            raise ConfigurationError(f"unknown predictor '{kind}' (available: {', '.join(self.available())})")
        return factory(**options)

    @staticmethod
    def run(predictor: PredictorBase, request: PredictionRequest) -> list[Prediction]:
        try:
            return predictor.predict(request)
        except Exception:
            logger.exception("Predictor %s failed on context %s", predictor.name, request.context.context_id)
            raise


def default_registry() -> PredictorRegistry:
    from .analytical_rir import AnalyticalRirPredictor
    from .fewshot import FewShotPredictor
    from .ground_truth import GroundTruthPredictor
    from .linear_interpolation import LinearInterpolationPredictor
    from .nearest_neighbor import NearestNeighborPredictor

    registry = PredictorRegistry()
    registry.register(NearestNeighborPredictor.name, NearestNeighborPredictor)
    registry.register(LinearInterpolationPredictor.name, LinearInterpolationPredictor)
    registry.register(AnalyticalRirPredictor.name, AnalyticalRirPredictor)
    registry.register(FewShotPredictor.name, FewShotPredictor)
    registry.register(GroundTruthPredictor.name, GroundTruthPredictor)
    return registry
