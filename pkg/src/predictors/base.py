from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from src.acoustics.dsp import Spectrogram
from src.acoustics.simulator import BinauralRir
from src.data.dataset import RirDataset
from src.data.manifest import ContextEntry, QueryEntry


@dataclass(frozen=True)
class PredictionRequest:
    dataset: RirDataset
    context: ContextEntry
    queries: list[QueryEntry] = field(default_factory=list)
    context_size: int = 0  # 0 = every observation


@dataclass(frozen=True)
class Prediction:
    spectrogram: Spectrogram  # log domain
    waveform: BinauralRir | None = None  # set when the predictor produces a real waveform


class PredictorBase(ABC):
    name: str = ""

    @abstractmethod
    def predict(self, request: PredictionRequest) -> list[Prediction]:
        """One prediction per query, in request order."""
        ...

    def describe(self) -> dict:
        return {"predictor": self.name}
