"""Finite-difference checks of the training objective and of the full model at float64."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.config.models import LossConfig, ModelConfig
from src.nn import tensor as T
from src.nn.gradcheck import GradCheckReport, check_array_gradient, gradient_check

from .features import POSE_ATTRIBUTES, SOURCE_ATTRIBUTES, ContextArrays
from .losses import energy_decay_loss, l1_loss, total_loss
from .model import FewShotRirModel

logger = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def tiny_model_config() -> ModelConfig:
    return ModelConfig(
        d_model=8,
        n_enc_layers=1,
        n_dec_layers=1,
        n_heads=2,
        ffn_hidden=12,
        dropout=0.0,
        pe_frequencies=2,
        modality_dim=2,
        n_rays=5,
        depth_hidden=6,
        depth_dim=4,
        echo_bands=2,
        echo_time_bins=2,
        echo_hidden=6,
        echo_dim=4,
        head_hidden_dims=(8,),
        output_shape=(2, 4, 6),
        dtype="float64",
    )


@dataclass(frozen=True)
class SuiteResult:
    name: str
    report: GradCheckReport

    def to_dict(self) -> dict:
        return {"name": self.name, **self.report.to_dict()}


def loss_functions(cfg: LossConfig) -> dict[str, LossFn]:
    def total(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
        value = total_loss(pred, target, cfg)
        return value.total, value.gradient

    return {
        "l1": l1_loss,
        "energy_decay": lambda p, t: energy_decay_loss(p, t, cfg),
        "total": total,
    }


def check_losses(
    n_instances: int = 100,
    shape: tuple[int, ...] = (2, 5, 7),
    lambda_d: float = 0.5,
    tolerance: float = 1e-4,
    samples_per_instance: int = 4,
    seed: int = 0,
) -> list[SuiteResult]:
    """Random positive log spectrograms, so the expm1 clamp never engages."""
    rng = np.random.default_rng(seed)
    results = []
    for name, fn in loss_functions(LossConfig(lambda_d=lambda_d)).items():
        entries = []
        for i in range(n_instances):
            pred = rng.uniform(0.05, 2.0, size=shape)
            target = rng.uniform(0.05, 2.0, size=shape)
            _, grad = fn(pred, target)
            report = check_array_gradient(
                lambda x: fn(x, target)[0], pred, grad, samples_per_instance, rng, tolerance=tolerance, name=f"{name}[{i}]"
            )
            entries.extend(report.entries)
        results.append(SuiteResult(name, GradCheckReport(tolerance, entries)))
    return results


def random_context(cfg: ModelConfig, n_obs: int, rng: np.random.Generator) -> ContextArrays:
    pose_dim = 2 * cfg.pe_frequencies * POSE_ATTRIBUTES
    return ContextArrays(
        depth=rng.uniform(0.2, 2.0, size=(n_obs, cfg.n_rays)),
        echo=rng.uniform(0.0, 3.0, size=(n_obs, cfg.echo_feature_dim)),
        pose=rng.uniform(-1.0, 1.0, size=(n_obs, pose_dim)),
    )


def random_queries(cfg: ModelConfig, n_queries: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n_queries, 2 * cfg.pe_frequencies * (SOURCE_ATTRIBUTES + POSE_ATTRIBUTES)))


def check_model(
    n_instances: int = 3,
    lambda_d: float = 0.5,
    tolerance: float = 1e-4,
    samples_per_param: int = 2,
    seed: int = 0,
    cfg: ModelConfig | None = None,
) -> SuiteResult:
    """End-to-end: backprop through head, decoder, encoder and token embeddings, including L_D."""
    cfg = cfg or tiny_model_config()
    loss_cfg = LossConfig(lambda_d=lambda_d)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_instances):
        model = FewShotRirModel(cfg, seed=seed + i)
        model.eval()
        context = random_context(cfg, 3, rng)
        queries = random_queries(cfg, 2, rng)
        target = rng.uniform(0.05, 2.0, size=(2, *cfg.output_shape))

        def objective(values: np.ndarray) -> tuple[float, np.ndarray]:
            value = total_loss(values, target, loss_cfg)
            return value.total, value.gradient

        def loss_fn() -> T.Tensor:
            return T.apply_loss(model(context, queries), objective, name="objective")

        report = gradient_check(loss_fn, list(model.named_parameters()), tolerance, samples_per_param, rng)
        entries.extend(report.entries)
    return SuiteResult("model", GradCheckReport(tolerance, entries))


def run_suite(n_instances: int = 100, model_instances: int = 3, tolerance: float = 1e-4, seed: int = 0) -> list[SuiteResult]:
    results = check_losses(n_instances, tolerance=tolerance, seed=seed)
    results.append(check_model(model_instances, tolerance=tolerance, seed=seed))
    for r in results:
        logger.info("%s: %d entries, max rel error %.3g", r.name, len(r.report.entries), r.report.max_rel_error)
    return results
