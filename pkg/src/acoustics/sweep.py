"""Exponential sine sweep excitation and regularized deconvolution.

The sweep is x(t) = A * sin(K * (exp(t / L) - 1)) with L = T / ln(w2 / w1)
and K = w1 * L, so its instantaneous frequency rises from f_start to f_end.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

from src.config.models import SweepConfig
from src.errors import ShapeError

from .simulator import BinauralRir

logger = logging.getLogger(__name__)

# Regularization relative to the peak sweep power.
_EPS_IN_BAND = 1e-10
_EPS_OUT_OF_BAND = 1e3
_TAPER_OCTAVES = 1.0 / 3.0
_FADE_SECONDS = 0.01


def _rate_constants(cfg: SweepConfig) -> tuple[float, float]:
    w1 = 2.0 * math.pi * cfg.f_start
    w2 = 2.0 * math.pi * cfg.f_end
    rate = cfg.duration / math.log(w2 / w1)
    return w1 * rate, rate


def sweep_phase(t: np.ndarray, cfg: SweepConfig) -> np.ndarray:
    k, rate = _rate_constants(cfg)
    return k * (np.exp(np.asarray(t) / rate) - 1.0)


def instantaneous_frequency(t: np.ndarray | float, cfg: SweepConfig) -> np.ndarray:
    """d(phase)/dt / 2pi in Hz."""
    _, rate = _rate_constants(cfg)
    return cfg.f_start * np.exp(np.asarray(t, dtype=np.float64) / rate)


def ess_sweep(cfg: SweepConfig, sample_rate: int) -> np.ndarray:
    cfg.validate(sample_rate)
    n = int(round(cfg.duration * sample_rate))
    t = np.arange(n) / sample_rate
    x = cfg.amplitude * np.sin(sweep_phase(t, cfg))
    # Short raised-cosine fades keep the ends click-free.
    fade = min(int(_FADE_SECONDS * sample_rate), n // 20)
    if fade > 1:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(fade) / fade))
        x[:fade] *= ramp
        x[n - fade:] *= ramp[::-1]
    return x


def _regularization(freqs: np.ndarray, cfg: SweepConfig, peak_power: float) -> np.ndarray:
    """Per-bin epsilon, log-interpolated across a taper just inside each band edge."""
    log_in = math.log(_EPS_IN_BAND)
    log_out = math.log(_EPS_OUT_OF_BAND)
    eps = np.full(freqs.shape, log_out)
    inside = (freqs >= cfg.f_start) & (freqs <= cfg.f_end)
    octaves_from_edge = np.zeros(freqs.shape)
    with np.errstate(divide="ignore"):
        octaves_from_edge[inside] = np.minimum(
            np.log2(freqs[inside] / cfg.f_start), np.log2(cfg.f_end / freqs[inside])
        )
    ramp = np.clip(octaves_from_edge / _TAPER_OCTAVES, 0.0, 1.0)
    eps[inside] = log_out + (log_in - log_out) * ramp[inside]
    return np.exp(eps) * peak_power


def _inverse_spectrum(sweep: np.ndarray, m: int, cfg: SweepConfig, sample_rate: int) -> np.ndarray:
    n = sweep.shape[0]
    spectrum = sp_fft.rfft(sweep, m)
    power = np.abs(spectrum) ** 2
    freqs = sp_fft.rfftfreq(m, 1.0 / sample_rate)
    eps = _regularization(freqs, cfg, float(power.max()))
    delay = np.exp(-2j * np.pi * np.arange(freqs.shape[0]) * (n - 1) / m)
    return np.conj(spectrum) * delay / (power + eps)


def inverse_filter(sweep: np.ndarray, cfg: SweepConfig, sample_rate: int) -> np.ndarray:
    """Time-reversed, equalized sweep; sweep * inverse peaks at len(sweep) - 1."""
    sweep = np.asarray(sweep, dtype=np.float64)
    m = sp_fft.next_fast_len(2 * sweep.shape[0], real=True)
    return sp_fft.irfft(_inverse_spectrum(sweep, m, cfg, sample_rate), m)


def deconvolve(
    recorded: np.ndarray, sweep: np.ndarray, cfg: SweepConfig, sample_rate: int, length: int
) -> np.ndarray:
    """Recover ``length`` samples of impulse response from recordings shaped (..., N)."""
    recorded = np.asarray(recorded, dtype=np.float64)
    sweep = np.asarray(sweep, dtype=np.float64)
    n = sweep.shape[0]
    if recorded.shape[-1] < n:
        raise ShapeError(f"recording has {recorded.shape[-1]} samples, shorter than the sweep ({n})")
    m = sp_fft.next_fast_len(recorded.shape[-1] + n + length, real=True)
    inverse = _inverse_spectrum(sweep, m, cfg, sample_rate)
    out = sp_fft.irfft(sp_fft.rfft(recorded, m, axis=-1) * inverse, m, axis=-1)
    return out[..., n - 1:n - 1 + length]


def record_sweep(rir: BinauralRir, sweep: np.ndarray) -> np.ndarray:
    """What the two ears record when the sweep is played through the RIR."""
    return signal.fftconvolve(rir.samples, np.asarray(sweep, dtype=np.float64)[None, :], axes=-1)


def measure_rir(
    recorded: np.ndarray, sweep: np.ndarray, cfg: SweepConfig, sample_rate: int, length: int
) -> BinauralRir:
    recorded = np.asarray(recorded, dtype=np.float64)
    if recorded.ndim != 2 or recorded.shape[0] != 2:
        raise ShapeError(f"expected a two-channel recording, got shape {recorded.shape}")
    return BinauralRir(deconvolve(recorded, sweep, cfg, sample_rate, length), sample_rate)
