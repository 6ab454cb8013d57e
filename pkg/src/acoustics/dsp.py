"""Magnitude STFT, the ln(1+x) log map and waveform helpers.

Framing is centered: each channel is padded with ``fft_size // 2`` zeros on
both sides and a periodic Hann window of ``win_length`` samples sits in the
middle of every ``fft_size`` frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from src.config.models import StftConfig
from src.errors import ConfigurationError, DomainError, ShapeError

from .simulator import BinauralRir

logger = logging.getLogger(__name__)

LINEAR = "linear"
LOG = "log"


@dataclass(frozen=True)
class Spectrogram:
    data: np.ndarray = field(repr=False)  # (2, F, T)
    cfg: StftConfig | None = None
    domain: str = LINEAR

    def __post_init__(self) -> None:
        if self.domain not in (LINEAR, LOG):
            raise DomainError(f"unknown spectrogram domain '{self.domain}'")
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ShapeError(f"spectrogram must be (channels, F, T), got {data.shape}")
        if self.cfg is not None and data.shape[1] != self.cfg.n_freqs:
            raise ShapeError(f"spectrogram has {data.shape[1]} bins, config expects {self.cfg.n_freqs}")
        if self.domain == LINEAR and np.any(data < 0):
            raise DomainError("linear-domain spectrogram has negative entries")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    def require(self, domain: str) -> None:
        if self.domain != domain:
            raise DomainError(f"expected a {domain}-domain spectrogram, got {self.domain}")


@lru_cache(maxsize=16)
def analysis_window(win_length: int, fft_size: int) -> np.ndarray:
    """Periodic Hann of win_length, zero-padded and centered in fft_size."""
    window = signal.get_window("hann", win_length, fftbins=True)
    padded = np.zeros(fft_size)
    start = (fft_size - win_length) // 2
    padded[start:start + win_length] = window
    padded.setflags(write=False)
    return padded


def _frames(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    pad = cfg.fft_size // 2
    padded = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)])
    frames = sliding_window_view(padded, cfg.fft_size, axis=-1)[..., :: cfg.hop_length, :]
    return frames * analysis_window(cfg.win_length, cfg.fft_size)


def stft(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Complex STFT of (..., L) samples, shaped (..., F, T)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < cfg.win_length:
        raise ShapeError(f"signal of {x.shape[-1]} samples is shorter than one window ({cfg.win_length})")
    spec = np.fft.rfft(_frames(x, cfg), n=cfg.fft_size, axis=-1)
    return np.swapaxes(spec, -1, -2)


def stft_mag(rir: BinauralRir, cfg: StftConfig) -> Spectrogram:
    if rir.sample_rate != cfg.sample_rate:
        raise ConfigurationError(f"RIR rate {rir.sample_rate} Hz differs from STFT rate {cfg.sample_rate} Hz")
    return Spectrogram(np.abs(stft(rir.samples, cfg)), cfg, LINEAR)


def log_mag(spec: Spectrogram) -> Spectrogram:
    spec.require(LINEAR)
    return Spectrogram(np.log1p(spec.data), spec.cfg, LOG)


def exp_mag(spec: Spectrogram) -> Spectrogram:
    spec.require(LOG)
    return Spectrogram(np.maximum(np.expm1(spec.data), 0.0), spec.cfg, LINEAR)


def log_spectrogram(rir: BinauralRir, cfg: StftConfig) -> Spectrogram:
    return log_mag(stft_mag(rir, cfg))


def spectrogram_energy(spec: Spectrogram) -> float:
    """Waveform-energy estimate from a linear magnitude STFT, compensated for window overlap."""
    spec.require(LINEAR)
    cfg = spec.cfg
    if cfg is None:
        raise ConfigurationError("spectrogram_energy needs the STFT config")
    power = spec.data**2
    # One-sided spectrum: every bin except DC (and Nyquist for even sizes) stands for two.
    weights = np.full(cfg.n_freqs, 2.0)
    weights[0] = 1.0
    if cfg.fft_size % 2 == 0:
        weights[-1] = 1.0
    full = float(np.sum(power * weights[None, :, None]))
    window = analysis_window(cfg.win_length, cfg.fft_size)
    return full / (cfg.fft_size * float(np.sum(window**2)) / cfg.hop_length)


def reconstruct_waveform(spec: Spectrogram, length: int) -> BinauralRir:
    """Zero-phase overlap-add resynthesis. Timing is only resolved to the hop size."""
    if spec.domain == LOG:
        spec = exp_mag(spec)
    cfg = spec.cfg
    if cfg is None:
        raise ConfigurationError("reconstruct_waveform needs the STFT config")
    n_fft, hop = cfg.fft_size, cfg.hop_length
    pad = n_fft // 2
    window = analysis_window(cfg.win_length, n_fft)

    frames = np.fft.irfft(np.swapaxes(spec.data, -1, -2), n=n_fft, axis=-1)
    frames = np.fft.fftshift(frames, axes=-1) * window
    n_channels, n_frames = frames.shape[0], frames.shape[1]
    total = (n_frames - 1) * hop + n_fft
    out = np.zeros((n_channels, total))
    norm = np.zeros(total)
    for t in range(n_frames):
        out[:, t * hop:t * hop + n_fft] += frames[:, t]
        norm[t * hop:t * hop + n_fft] += window**2
    out = out / np.maximum(norm, 1e-8)
    out = out[:, pad:pad + length]
    if out.shape[1] < length:
        out = np.pad(out, [(0, 0), (0, length - out.shape[1])])
    return BinauralRir(out, cfg.sample_rate)


def convolve(signal_in: np.ndarray, rir: BinauralRir, sample_rate: int) -> np.ndarray:
    """Full linear convolution of a mono (or per-channel) signal with both RIR channels."""
    if sample_rate != rir.sample_rate:
        raise ConfigurationError(f"signal rate {sample_rate} Hz differs from RIR rate {rir.sample_rate} Hz")
    x = np.asarray(signal_in, dtype=np.float64)
    if x.ndim == 1:
        x = np.broadcast_to(x, (2, x.shape[0]))
    elif x.shape[0] != 2:
        raise ShapeError(f"expected a mono or two-channel signal, got shape {x.shape}")
    return signal.fftconvolve(x, rir.samples, axes=-1)


def decay_curve(linear: np.ndarray) -> np.ndarray:
    """Schroeder backward integration of the full-band energy envelope.

    ``linear`` is (..., F, T) magnitudes; returns (..., T) with
    D[t] = sum_{tau >= t} sum_f linear[f, tau] ** 2.
    """
    envelope = np.sum(np.square(linear), axis=-2)
    return np.cumsum(envelope[..., ::-1], axis=-1)[..., ::-1]
