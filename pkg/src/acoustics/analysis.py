"""Energy decay, acoustic parameters and the evaluation metrics built on them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from src.config.models import StftConfig
from src.errors import DegenerateInputError, DomainError, InsufficientDecayError, ShapeError
from src.learning.losses import l1_loss

from .dsp import LINEAR, LOG, Spectrogram, decay_curve, exp_mag, stft_mag
from .simulator import BinauralRir

logger = logging.getLogger(__name__)

DRR_CAP_DB = 80.0
# T20 evaluation range and the early-decay range, dB relative to D[0].
T20_SPAN = (-5.0, -25.0)
EDT_SPAN = (0.0, -10.0)


@dataclass(frozen=True)
class EnergyDecayCurve:
    values: np.ndarray = field(repr=False)  # (channels, T)
    frame_rate: float | None = None

    def db(self) -> np.ndarray:
        head = self.values[..., :1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return 10.0 * np.log10(self.values / head)


@dataclass(frozen=True)
class AcousticParams:
    rt60: np.ndarray  # seconds per channel, NaN when undefined
    drr: np.ndarray  # dB per channel
    edt: np.ndarray  # seconds per channel, NaN when undefined

    def to_dict(self) -> dict:
        def clean(values: np.ndarray) -> list[float | None]:
            return [None if math.isnan(v) else float(v) for v in values]

        return {"rt60": clean(self.rt60), "drr": clean(self.drr), "edt": clean(self.edt)}


def energy_decay_curve(spec: Spectrogram) -> EnergyDecayCurve:
    if spec.domain != LINEAR:
        raise DomainError("energy_decay_curve needs a linear-magnitude spectrogram")
    frame_rate = spec.cfg.frame_rate if spec.cfg is not None else None
    return EnergyDecayCurve(decay_curve(spec.data), frame_rate)


def schroeder_curve(samples: np.ndarray) -> np.ndarray:
    """Waveform-domain Schroeder integral, (..., L) -> (..., L)."""
    squared = np.square(np.asarray(samples, dtype=np.float64))
    return np.cumsum(squared[..., ::-1], axis=-1)[..., ::-1]


def _fit_decay(edc: EnergyDecayCurve, frame_rate: float | None, span: tuple[float, float]) -> np.ndarray:
    rate = frame_rate if frame_rate is not None else edc.frame_rate
    if rate is None:
        raise ShapeError("decay fit needs a frame rate")
    upper, lower = span
    db = edc.db()
    out = np.empty(db.shape[0])
    for channel, curve in enumerate(db):
        if not np.isfinite(curve[0]):
            raise InsufficientDecayError(f"channel {channel} has no energy", side=f"channel {channel}")
        if not np.any(curve <= lower):
            raise InsufficientDecayError(
                f"channel {channel} decays only to {np.nanmin(curve):.1f} dB, never reaching {lower} dB",
                side=f"channel {channel}",
            )
        stop = int(np.argmax(curve <= lower))
        frames = np.arange(stop + 1)
        mask = (curve[: stop + 1] <= upper) & (curve[: stop + 1] >= lower)
        if np.count_nonzero(mask) < 2:
            # Steep drop between two frames: fit the bracketing pair.
            mask = np.zeros(stop + 1, dtype=bool)
            mask[max(0, stop - 1): stop + 1] = True
        t = frames[mask] / rate
        y = curve[: stop + 1][mask]
        if not np.all(np.isfinite(y)):
            finite = np.isfinite(y)
            t, y = t[finite], y[finite]
        if t.shape[0] < 2:
            raise InsufficientDecayError(f"channel {channel} has too few points to fit", side=f"channel {channel}")
        slope, _ = np.polyfit(t, y, 1)
        if slope >= 0:
            raise InsufficientDecayError(f"channel {channel} does not decay", side=f"channel {channel}")
        out[channel] = -60.0 / slope
    return out


def rt60(edc: EnergyDecayCurve, sr_frames: float | None = None) -> np.ndarray:
    """T20 estimate: line fit on the -5..-25 dB span, extrapolated to -60 dB."""
    return _fit_decay(edc, sr_frames, T20_SPAN)


def edt(edc: EnergyDecayCurve, sr_frames: float | None = None) -> np.ndarray:
    return _fit_decay(edc, sr_frames, EDT_SPAN)


def drr(rir: BinauralRir, direct_window_ms: float = 2.5) -> np.ndarray:
    w = int(round(direct_window_ms * rir.sample_rate / 1000.0))
    out = np.empty(2)
    for channel, x in enumerate(rir.samples):
        energy = np.square(x)
        total = float(energy.sum())
        if total <= 0:
            raise DegenerateInputError(f"channel {channel} of the RIR is all zeros")
        peak = int(np.argmax(np.abs(x)))
        direct = float(energy[max(0, peak - w): peak + w + 1].sum())
        reverberant = total - direct
        if reverberant <= 0:
            out[channel] = DRR_CAP_DB
        else:
            out[channel] = float(np.clip(10.0 * np.log10(direct / reverberant), -DRR_CAP_DB, DRR_CAP_DB))
    return out


def stft_error(pred: Spectrogram, target: Spectrogram) -> float:
    if pred.domain != LOG or target.domain != LOG:
        raise DomainError("stft_error compares log-magnitude spectrograms")
    if pred.shape != target.shape:
        raise ShapeError(f"spectrogram shapes differ: {pred.shape} vs {target.shape}")
    value, _ = l1_loss(pred.data, target.data)
    return value


def _as_linear(item: BinauralRir | Spectrogram, cfg: StftConfig | None) -> Spectrogram:
    if isinstance(item, BinauralRir):
        if cfg is None:
            raise ShapeError("an STFT config is needed to analyse a waveform")
        return stft_mag(item, cfg)
    return exp_mag(item) if item.domain == LOG else item


def spectrogram_rt60(item: BinauralRir | Spectrogram, cfg: StftConfig | None = None) -> np.ndarray:
    spec = _as_linear(item, cfg)
    return rt60(energy_decay_curve(spec), (cfg or spec.cfg).frame_rate)


def rte(
    pred: BinauralRir | Spectrogram, target: BinauralRir | Spectrogram, cfg: StftConfig | None = None
) -> float:
    """Mean over channels of |RT60(pred) - RT60(target)| in seconds."""
    values = {}
    for side, item in (("pred", pred), ("target", target)):
        try:
            values[side] = spectrogram_rt60(item, cfg)
        except InsufficientDecayError as exc:
            raise InsufficientDecayError(f"{side}: {exc}", side=side) from exc
    return float(np.mean(np.abs(values["pred"] - values["target"])))


def drre(pred: BinauralRir, target: BinauralRir, direct_window_ms: float = 2.5) -> float:
    return float(np.mean(np.abs(drr(pred, direct_window_ms) - drr(target, direct_window_ms))))


def acoustic_params(rir: BinauralRir, cfg: StftConfig, direct_window_ms: float = 2.5) -> AcousticParams:
    """RT60, DRR and EDT per channel; NaN where a value is undefined."""
    edc = energy_decay_curve(stft_mag(rir, cfg))
    values = {}
    for name, fn in (("rt60", rt60), ("edt", edt)):
        try:
            values[name] = fn(edc, cfg.frame_rate)
        except InsufficientDecayError:
            logger.debug("%s undefined for this RIR", name)
            values[name] = np.full(2, np.nan)
    try:
        values["drr"] = drr(rir, direct_window_ms)
    except DegenerateInputError:
        values["drr"] = np.full(2, np.nan)
    return AcousticParams(rt60=values["rt60"], drr=values["drr"], edt=values["edt"])
