from __future__ import annotations

import logging
import math

import numpy as np
from scipy import signal

from src.errors import ConfigurationError, DegenerateInputError

from .geometry import as_rng
from .simulator import BinauralRir

logger = logging.getLogger(__name__)

NOISE_KINDS = ("white", "burst", "pink")

# Burst passband as fractions of the sample rate.
_BURST_BAND = (0.02, 0.35)


def _white(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n)


def _pink(n: int, rng: np.random.Generator) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.arange(spectrum.shape[0], dtype=np.float64)
    freqs[0] = 1.0
    return np.fft.irfft(spectrum / np.sqrt(freqs), n)


def _burst(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    sos = signal.butter(4, [f * sample_rate for f in _BURST_BAND], btype="bandpass", fs=sample_rate, output="sos")
    band = signal.sosfilt(sos, rng.standard_normal(n))
    span = max(8, int(n * rng.uniform(0.2, 0.5)))
    start = int(rng.integers(0, max(1, n - span)))
    gate = np.zeros(n)
    gate[start:start + span] = signal.windows.tukey(min(span, n - start), alpha=0.25)
    return band * gate


def ambient_noise(
    n_channels: int, n_samples: int, kind: str, sample_rate: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Independent noise per channel, shape (n_channels, n_samples), unit-less and unscaled."""
    if kind not in NOISE_KINDS:
        raise ConfigurationError(f"unknown noise kind '{kind}' (expected one of {NOISE_KINDS})")
    rng = as_rng(seed)
    rows = []
    for _ in range(n_channels):
        if kind == "white":
            rows.append(_white(n_samples, rng))
        elif kind == "pink":
            rows.append(_pink(n_samples, rng))
        else:
            rows.append(_burst(n_samples, sample_rate, rng))
    return np.stack(rows)


def mix_at_snr(
    clean: np.ndarray, snr_db: float, kind: str, sample_rate: int, seed: int | np.random.Generator
) -> np.ndarray:
    """Add noise to a (channels, samples) array so that 10*log10(E_clean / E_noise) == snr_db."""
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy()
    if not math.isfinite(snr_db):
        raise ConfigurationError(f"snr_db must be finite or +inf, got {snr_db}")
    e_clean = float(np.sum(clean**2))
    if e_clean <= 0:
        raise DegenerateInputError("cannot set an SNR against a zero-energy signal")
    noise = ambient_noise(clean.shape[0], clean.shape[1], kind, sample_rate, seed)
    e_noise = float(np.sum(noise**2))
    if e_noise <= 0:
        raise DegenerateInputError(f"{kind} noise realization has zero energy")
    noise *= math.sqrt(e_clean / (e_noise * 10.0 ** (snr_db / 10.0)))
    return clean + noise


def add_ambient_noise(
    echo: BinauralRir, noise_kind: str, snr_db: float, seed: int | np.random.Generator
) -> BinauralRir:
    mixed = mix_at_snr(echo.samples, snr_db, noise_kind, echo.sample_rate, seed)
    logger.debug("Mixed %s noise at %.1f dB SNR", noise_kind, snr_db)
    return BinauralRir(mixed, echo.sample_rate)
