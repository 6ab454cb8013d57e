"""Read-side access to a rendered dataset.

Context inputs (depth scans, echoes, poses) and query targets (ground-truth
RIRs) are loaded through separate methods so predictors never touch target
files.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Sequence

import numpy as np

from src.acoustics.dsp import LOG, Spectrogram, log_spectrogram
from src.acoustics.geometry import Pose
from src.acoustics.simulator import BinauralRir
from src.config.models import ModelConfig, StftConfig
from src.errors import ConfigurationError, DatasetError
from src.learning.features import (
    ContextArrays,
    Observation,
    ObservationFeatures,
    context_arrays,
    depth_features,
    echo_features,
    query_arrays,
)

from .manifest import ContextEntry, DatasetManifest, QueryEntry
from .rendering import read_rir
from .tensor_file import load_named, save_named

logger = logging.getLogger(__name__)

CACHE_DIR = "cache"


class RirDataset:
    def __init__(self, root: Path, manifest: DatasetManifest | None = None) -> None:
        self.root = Path(root)
        self.manifest = manifest if manifest is not None else DatasetManifest.load(self.root)
        self.stft: StftConfig = self.manifest.stft
        self.sim = self.manifest.sim
        self._lock = threading.Lock()
        self._features: dict[tuple[str, int, int], list[ObservationFeatures]] = {}
        self._targets: dict[str, np.ndarray] = {}

    @classmethod
    def open(cls, root: Path) -> RirDataset:
        dataset = cls(root)
        dataset.manifest.validate()
        return dataset

    def check_compatible(self, model_cfg: ModelConfig) -> None:
        expected = (2, self.stft.n_freqs, self.stft.n_frames(self.sim.rir_samples))
        if model_cfg.head == "spectrogram" and tuple(model_cfg.output_shape) != expected:
            raise ConfigurationError(
                f"model predicts {tuple(model_cfg.output_shape)} spectrograms, dataset holds {expected}"
            )
        if model_cfg.n_rays != self.manifest.dataset.n_rays:
            raise ConfigurationError(f"model expects {model_cfg.n_rays} rays, dataset has {self.manifest.dataset.n_rays}")

    # context side

    def echo(self, ctx: ContextEntry, index: int) -> BinauralRir:
        return read_rir(self.root / ctx.observations[index].echo_file)

    def observations(self, ctx: ContextEntry, size: int = 0) -> list[Observation]:
        entries = ctx.observations[:size] if size > 0 else ctx.observations
        return [Observation(o.depth, read_rir(self.root / o.echo_file), o.pose) for o in entries]

    def echo_spectrograms(self, ctx: ContextEntry, size: int = 0) -> list[Spectrogram]:
        return [log_spectrogram(obs.echo, self.stft) for obs in self.observations(ctx, size)]

    def _cache_path(self, ctx: ContextEntry, bands: int, time_bins: int) -> Path:
        return self.root / CACHE_DIR / f"{ctx.context_id}.b{bands}t{time_bins}.fsrn"

    def features(self, ctx: ContextEntry, bands: int, time_bins: int) -> list[ObservationFeatures]:
        key = (ctx.context_id, bands, time_bins)
        with self._lock:
            cached = self._features.get(key)
        if cached is not None:
            return cached
        path = self._cache_path(ctx, bands, time_bins)
        if path.is_file():
            stored = load_named(path)
            echoes = stored["echo"]
        else:
            echoes = np.stack(
                [echo_features(self.echo(ctx, i), self.stft, bands, time_bins) for i in range(len(ctx.observations))]
            )
        out = [
            ObservationFeatures(depth_features(o.depth), echoes[i].astype(np.float64), o.pose)
            for i, o in enumerate(ctx.observations)
        ]
        with self._lock:
            self._features[key] = out
        return out

    def write_feature_cache(self, bands: int, time_bins: int) -> None:
        for ctx in self.manifest.contexts:
            feats = self.features(ctx, bands, time_bins)
            save_named(self._cache_path(ctx, bands, time_bins), {"echo": np.stack([f.echo for f in feats])})
        logger.info("Cached echo features for %d contexts", len(self.manifest.contexts))

    def context_arrays(
        self, ctx: ContextEntry, model_cfg: ModelConfig, indices: Sequence[int] | None = None
    ) -> tuple[ContextArrays, Pose]:
        """Arrays for a subset of observations (default all); the anchor is the first one used."""
        feats = self.features(ctx, model_cfg.echo_bands, model_cfg.echo_time_bins)
        if indices is not None:
            feats = [feats[i] for i in indices]
        anchor = feats[0].pose
        return context_arrays(feats, anchor, model_cfg.pe_frequencies), anchor

    @staticmethod
    def query_arrays(queries: Sequence[QueryEntry], anchor: Pose, model_cfg: ModelConfig) -> np.ndarray:
        return query_arrays([q.query for q in queries], anchor, model_cfg.pe_frequencies)

    # target side

    def target_rir(self, query: QueryEntry) -> BinauralRir:
        return read_rir(self.root / query.rir_file)

    def target_spectrogram(self, query: QueryEntry) -> Spectrogram:
        with self._lock:
            cached = self._targets.get(query.query_id)
        if cached is None:
            cached = log_spectrogram(self.target_rir(query), self.stft).data
            with self._lock:
                self._targets[query.query_id] = cached
        return Spectrogram(cached, self.stft, LOG)

    def target_batch(self, queries: Sequence[QueryEntry]) -> np.ndarray:
        """(Q, 2, F, T) log magnitudes."""
        if not queries:
            raise DatasetError("empty query batch")
        return np.stack([self.target_spectrogram(q).data for q in queries])
