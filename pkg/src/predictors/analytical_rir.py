"""Exponentially decaying noise shaped to a target RT60 and DRR."""

from __future__ import annotations

import logging
import math
import zlib
from pathlib import Path

import numpy as np

from src.acoustics.analysis import acoustic_params, drr as measure_drr
from src.acoustics.dsp import log_spectrogram
from src.acoustics.simulator import BinauralRir
from src.errors import ConfigurationError, ParameterError
from src.learning.checkpoint import load_checkpoint
from src.learning.model import decode_acoustic_params

from .base import Prediction, PredictionRequest, PredictorBase

logger = logging.getLogger(__name__)

ESTIMATORS = ("oracle", "learned")
FALLBACK_RT60 = 0.3
FALLBACK_DRR = 0.0
_WINDOW_PASSES = 8


def _direct_bounds(peak: int, w: int, length: int) -> tuple[int, int]:
    return max(0, peak - w), min(length, peak + w + 1)


def analytical_channel(
    rt60: float, drr_db: float, length: int, sample_rate: int, rng: np.random.Generator,
    direct_window_ms: float = 2.5,
) -> np.ndarray:
    """Unit white noise under a 10^(-3t/rt60) envelope, with the direct window and the tail
    rescaled against each other so the measured direct/reverberant ratio equals drr_db.

    The direct window starts at +-direct_window_ms around t=0, then follows the peak sample
    where the DRR measurement centres it.
    """
    if not rt60 > 0 or not math.isfinite(rt60):
        raise ParameterError(f"rt60 must be positive, got {rt60}")
    if not math.isfinite(drr_db):
        raise ParameterError(f"drr must be finite, got {drr_db}")
    w = int(round(direct_window_ms * sample_rate / 1000.0))
    t = np.arange(length) / sample_rate
    noise = rng.standard_normal(length) * np.power(10.0, -3.0 * t / rt60)
    ratio = 10.0 ** (drr_db / 10.0)

    out = noise
    lo, hi = _direct_bounds(0, w, length)
    for _ in range(_WINDOW_PASSES):
        direct = float(np.sum(noise[lo:hi] ** 2))
        tail = float(np.sum(noise[:lo] ** 2) + np.sum(noise[hi:] ** 2))
        if tail <= 0 or not math.isfinite(tail):
            raise ParameterError(f"a {length}-sample RIR leaves no tail energy to set a DRR against")
        if direct <= 0:
            raise ParameterError("the direct window holds no energy")
        # total energy 1: direct share ratio/(1+ratio), tail share 1/(1+ratio)
        out = noise / math.sqrt(tail * (1.0 + ratio))
        out[lo:hi] = noise[lo:hi] * math.sqrt(ratio / (direct * (1.0 + ratio)))
        bounds = _direct_bounds(int(np.argmax(np.abs(out))), w, length)
        if bounds == (lo, hi):
            return out
        lo, hi = bounds
    logger.debug("direct window still moving after %d passes (rt60=%.3f drr=%.1f)", _WINDOW_PASSES, rt60, drr_db)
    return out


def analytical_rir(
    target_rt60: np.ndarray | float,
    target_drr: np.ndarray | float,
    length: int,
    sample_rate: int,
    seed: int | np.random.Generator = 0,
    direct_window_ms: float = 2.5,
) -> BinauralRir:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rt60 = np.broadcast_to(np.asarray(target_rt60, dtype=np.float64), (2,))
    drr = np.broadcast_to(np.asarray(target_drr, dtype=np.float64), (2,))
    channels = [
        analytical_channel(float(rt60[c]), float(drr[c]), length, sample_rate, rng, direct_window_ms) for c in range(2)
    ]
    return BinauralRir(np.stack(channels), sample_rate)


def shaped_rir(
    rt60: np.ndarray, drr: np.ndarray, length: int, sample_rate: int, seed: int, direct_window_ms: float
) -> BinauralRir:
    """analytical_rir with fallbacks for undefined estimates; misses over 1 dB are logged."""
    usable_rt60 = np.isfinite(rt60) & (rt60 > 0)
    usable_drr = np.isfinite(drr)
    if not (usable_rt60.all() and usable_drr.all()):
        logger.warning(
            "Undefined estimate rt60=%s drr=%s, using %.2f s / %.1f dB", rt60, drr, FALLBACK_RT60, FALLBACK_DRR
        )
    rt60 = np.where(usable_rt60, rt60, FALLBACK_RT60)
    drr = np.where(usable_drr, drr, FALLBACK_DRR)
    rir = analytical_rir(rt60, drr, length, sample_rate, seed, direct_window_ms)
    got = measure_drr(rir, direct_window_ms)
    if np.any(np.abs(got - drr) > 1.0):
        logger.warning("Analytical RIR measures DRR %s dB against target %s dB", np.round(got, 2), np.round(drr, 2))
    return rir


class AnalyticalRirPredictor(PredictorBase):
    """Oracle arm reads the true parameters of each query; learned arm asks a parameter-head model."""

    name = "analytical_rir"

    def __init__(
        self,
        estimator: str = "oracle",
        checkpoint: Path | None = None,
        direct_window_ms: float = 2.5,
        seed: int = 0,
        **_options,
    ) -> None:
        if estimator not in ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {ESTIMATORS}")
        self.estimator = estimator
        self.direct_window_ms = direct_window_ms
        self.seed = seed
        self._model = None
        if estimator == "learned":
            if checkpoint is None:
                raise ConfigurationError("the learned estimator needs a checkpoint with an acoustic-params head")
            loaded = load_checkpoint(Path(checkpoint))
            if loaded.model.cfg.head != "acoustic_params":
                raise ConfigurationError(f"checkpoint {checkpoint} has a '{loaded.model.cfg.head}' head")
            self._model = loaded

    def describe(self) -> dict:
        return {"predictor": self.name, "estimator": self.estimator, "seed": self.seed}

    def _estimates(self, request: PredictionRequest) -> list[tuple[np.ndarray, np.ndarray]]:
        dataset = request.dataset
        if self._model is None:
            out = []
            for q in request.queries:
                params = acoustic_params(dataset.target_rir(q), dataset.stft, self.direct_window_ms)
                out.append((params.rt60, params.drr))
            return out
        model = self._model.model
        size = request.context_size or self._model.context_size
        indices = list(range(min(size, len(request.context.observations)))) if size > 0 else None
        arrays, anchor = dataset.context_arrays(request.context, model.cfg, indices)
        raw = model.predict(arrays, dataset.query_arrays(request.queries, anchor, model.cfg), self._model.ablation)
        rt60, drr = decode_acoustic_params(raw)
        return list(zip(rt60, drr))

    def predict(self, request: PredictionRequest) -> list[Prediction]:
        dataset = request.dataset
        length = dataset.sim.rir_samples
        out = []
        for q, (rt60, drr) in zip(request.queries, self._estimates(request)):
            seed = int(np.random.default_rng([self.seed, zlib.crc32(q.query_id.encode("utf-8"))]).integers(2**31))
            rir = shaped_rir(rt60, drr, length, dataset.sim.sample_rate, seed, self.direct_window_ms)
            out.append(Prediction(log_spectrogram(rir, dataset.stft), rir))
        return out
