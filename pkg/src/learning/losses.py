"""Training objective with analytic gradients w.r.t. the log-magnitude prediction.

All functions accept arrays shaped (..., 2, F, T); leading axes are treated as
a batch and every reduction is a mean, so a batch of Q spectrograms yields the
mean of the Q per-spectrogram losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.acoustics.dsp import decay_curve
from src.config.models import LossConfig
from src.errors import DomainError, ShapeError


@dataclass(frozen=True)
class LossValue:
    total: float
    l1: float
    l_d: float
    gradient: np.ndarray


def _check_shapes(pred: np.ndarray, target: np.ndarray) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    if pred.ndim < 3:
        raise ShapeError(f"expected (..., channels, F, T) arrays, got {pred.shape}")


def to_linear(log_values: np.ndarray) -> np.ndarray:
    return np.maximum(np.expm1(log_values), 0.0)


def _linear_jacobian(log_values: np.ndarray) -> np.ndarray:
    """d to_linear / d log_values, zero where the clamp is active."""
    return np.where(log_values > 0, np.exp(log_values), 0.0)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred)
    target = np.asarray(target)
    _check_shapes(pred, target)
    diff = pred - target
    value = float(np.mean(np.abs(diff)))
    return value, np.sign(diff) / diff.size


def _target_linear(target: np.ndarray, target_domain: str) -> np.ndarray:
    if target_domain == "log":
        return to_linear(target)
    if target_domain == "linear":
        if np.any(target < 0):
            raise DomainError("linear-domain target has negative magnitudes")
        return target
    raise DomainError(f"unknown target domain '{target_domain}'")


def energy_decay_loss(
    pred: np.ndarray,
    target: np.ndarray,
    cfg: LossConfig,
    target_domain: str = "log",
) -> tuple[float, np.ndarray]:
    """Masked L1 between the Schroeder curves of prediction and target."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    _check_shapes(pred, target)

    s = to_linear(pred)
    d_pred = decay_curve(s)
    d_target = decay_curve(_target_linear(target, target_domain))
    mask = d_target > cfg.tail_epsilon
    diff = d_pred - d_target
    value = float(np.sum(np.abs(diff) * mask) / diff.size)

    # Backward through D[t] = sum_{tau >= t} e[tau]: each e[tau] collects every t <= tau.
    g_curve = np.sign(diff) * mask / diff.size
    g_envelope = np.cumsum(g_curve, axis=-1)
    g_linear = 2.0 * s * g_envelope[..., None, :]
    return value, g_linear * _linear_jacobian(pred)


def linear_l1_loss(pred: np.ndarray, target: np.ndarray, target_domain: str = "log") -> tuple[float, np.ndarray]:
    """L1 between linear magnitudes, gradient still w.r.t. the log prediction."""
    pred = np.asarray(pred)
    value, g_linear = l1_loss(to_linear(pred), _target_linear(np.asarray(target), target_domain))
    return value, g_linear * _linear_jacobian(pred)


def total_loss(pred: np.ndarray, target: np.ndarray, cfg: LossConfig, target_domain: str = "log") -> LossValue:
    if cfg.l1_domain == "linear":
        l1, g_l1 = linear_l1_loss(pred, target, target_domain)
    else:
        if target_domain != "log":
            target = np.log1p(_target_linear(np.asarray(target), target_domain))
        l1, g_l1 = l1_loss(pred, target)
    l_d, g_d = energy_decay_loss(pred, target, cfg, "log" if cfg.l1_domain == "log" else target_domain)
    return LossValue(total=l1 + cfg.lambda_d * l_d, l1=l1, l_d=l_d, gradient=g_l1 + cfg.lambda_d * g_d)
