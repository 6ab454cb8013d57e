"""Adam training of the few-shot predictor on a rendered dataset."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from src.acoustics.analysis import acoustic_params
from src.config.models import ExperimentConfig, LossConfig
from src.data.dataset import RirDataset
from src.data.manifest import ContextEntry, QueryEntry
from src.errors import OptimizerError, PreconditionError, TrainingAborted
from src.nn import tensor as T
from src.nn.optim import Adam
from src.nn.tensor import Graph, Tensor

from .checkpoint import Checkpoint, save_checkpoint
from .losses import total_loss
from .model import FewShotRirModel, encode_acoustic_params

logger = logging.getLogger(__name__)

CURVE_NAME = "loss_curve.csv"
CURVE_FIELDS = ("step", "total", "l1", "l_d")


@dataclass(frozen=True)
class StepStats:
    step: int
    total: float
    l1: float
    l_d: float

    def row(self) -> list[str]:
        return [str(self.step), repr(self.total), repr(self.l1), repr(self.l_d)]


@dataclass(frozen=True)
class TrainResult:
    steps: int
    final: StepStats | None
    checkpoint: Path
    curve: Path


def effective_loss_config(cfg: ExperimentConfig) -> LossConfig:
    """The no_ld ablation is the same run with the decay term weighted zero."""
    return replace(cfg.loss, lambda_d=0.0) if cfg.train.ablation == "no_ld" else cfg.loss


def write_curve(path: Path, rows: list[StepStats]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CURVE_FIELDS)
    for row in rows:
        writer.writerow(row.row())
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(buffer.getvalue(), encoding="utf-8")
    tmp.replace(path)


def read_curve(path: Path, up_to: int) -> list[StepStats]:
    if not path.is_file():
        return []
    with path.open(encoding="utf-8", newline="") as handle:
        rows = [StepStats(int(r["step"]), float(r["total"]), float(r["l1"]), float(r["l_d"])) for r in csv.DictReader(handle)]
    return [r for r in rows if r.step <= up_to]


class Trainer:
    def __init__(
        self,
        model: FewShotRirModel,
        dataset: RirDataset,
        cfg: ExperimentConfig,
        run_dir: Path,
        resume: Checkpoint | None = None,
    ) -> None:
        dataset.check_compatible(model.cfg)
        self.model = model
        self.dataset = dataset
        self.cfg = cfg
        self.train_cfg = cfg.train
        self.loss_cfg = effective_loss_config(cfg)
        self.run_dir = Path(run_dir)
        self.ablation = cfg.train.ablation
        self.optimizer = Adam(
            list(model.named_parameters()),
            lr=cfg.train.lr,
            beta1=cfg.train.beta1,
            beta2=cfg.train.beta2,
            eps=cfg.train.eps,
        )
        self.items: list[tuple[ContextEntry, list[QueryEntry]]] = [
            (ctx, ctx.queries_in("train")) for ctx in dataset.manifest.contexts_in("seen") if ctx.queries_in("train")
        ]
        if not self.items:
            raise PreconditionError("the dataset has no training queries in seen rooms")
        self.start_step = 0
        self.history: list[StepStats] = []
        self._param_targets: dict[str, np.ndarray] = {}
        if resume is not None:
            resume.restore_optimizer(self.optimizer)
            self.start_step = resume.step
            self.history = read_curve(self.run_dir / CURVE_NAME, resume.step)
            logger.info("Resuming from step %d", resume.step)

    @property
    def checkpoint_dir(self) -> Path:
        return self.run_dir / "checkpoints"

    def meta(self) -> dict:
        return {
            "seed": self.train_cfg.seed,
            "ablation": self.ablation,
            "context_size": self.train_cfg.context_size,
            "stft": self.dataset.stft.to_dict(),
            "loss": self.loss_cfg.to_dict(),
            "train": self.train_cfg.to_dict(),
        }

    def _sample(self, rng: np.random.Generator) -> list[tuple[ContextEntry, np.ndarray | None, list[QueryEntry]]]:
        tc = self.train_cfg
        picks = rng.choice(len(self.items), size=tc.batch_size, replace=len(self.items) < tc.batch_size)
        batch = []
        for index in picks:
            ctx, train_queries = self.items[int(index)]
            n_obs = len(ctx.observations)
            k = min(tc.context_size, n_obs) if tc.context_size > 0 else n_obs
            obs = np.sort(rng.choice(n_obs, size=k, replace=False)) if k < n_obs else None
            q_idx = rng.choice(
                len(train_queries), size=tc.queries_per_context, replace=len(train_queries) < tc.queries_per_context
            )
            batch.append((ctx, obs, [train_queries[int(i)] for i in q_idx]))
        return batch

    def _param_target(self, query: QueryEntry) -> np.ndarray:
        cached = self._param_targets.get(query.query_id)
        if cached is None:
            params = acoustic_params(self.dataset.target_rir(query), self.dataset.stft, self.cfg.eval.direct_window_ms)
            cached = encode_acoustic_params(params.rt60, params.drr)
            self._param_targets[query.query_id] = cached
        return cached

    def objective(self, pred: Tensor, queries: list[QueryEntry], scale: float) -> tuple[Tensor, tuple[float, float, float]]:
        """Scalar loss node for one context, scaled by 1/batch; also returns (total, l1, l_d) unscaled."""
        parts: dict[str, float] = {}
        if self.model.cfg.head == "spectrogram":
            target = self.dataset.target_batch(queries)

            def fn(values: np.ndarray):
                lv = total_loss(values.astype(np.float64), target, self.loss_cfg)
                parts.update(total=lv.total, l1=lv.l1, l_d=lv.l_d)
                return lv.total * scale, lv.gradient * scale

        else:
            target = np.stack([self._param_target(q) for q in queries])
            valid = np.isfinite(target)
            count = max(int(valid.sum()), 1)
            clean = np.where(valid, target, 0.0)

            def fn(values: np.ndarray):
                diff = np.where(valid, values.astype(np.float64) - clean, 0.0)
                value = float(np.abs(diff).sum() / count)
                parts.update(total=value, l1=value, l_d=0.0)
                return value * scale, np.sign(diff) / count * scale

        node = T.apply_loss(pred, fn, name="objective")
        return node, (parts["total"], parts["l1"], parts["l_d"])

    def train_step(self, step: int) -> StepStats:
        rng = np.random.default_rng([self.train_cfg.seed, step])
        batch = self._sample(rng)
        scale = 1.0 / len(batch)
        self.optimizer.zero_grad()
        sums = np.zeros(3)
        for ctx, obs, queries in batch:
            arrays, anchor = self.dataset.context_arrays(ctx, self.model.cfg, obs)
            q = self.dataset.query_arrays(queries, anchor, self.model.cfg)
            with Graph() as graph:
                pred = self.model(arrays, q, self.ablation, rng)
                loss, parts = self.objective(pred, queries, scale)
            graph.backward(loss)
            sums += parts
        total, l1, l_d = (float(v) * scale for v in sums)
        return StepStats(step, total, l1, l_d)

    def _abort(self, step: int, reason: str) -> TrainingAborted:
        # Parameters still hold the values from before the failed update.
        path = save_checkpoint(self.checkpoint_dir / "last_good", self.model, step - 1, self.meta(), self.optimizer)
        write_curve(self.run_dir / CURVE_NAME, self.history)
        logger.error("Training aborted at step %d: %s", step, reason)
        return TrainingAborted(f"step {step}: {reason}", checkpoint=path)

    def train(self) -> TrainResult:
        tc = self.train_cfg
        self.model.train()
        final_dir = self.run_dir / "checkpoint"
        logger.info(
            "Training %d steps, %d contexts x %d queries per step, ablation=%s, lambda_d=%g",
            tc.steps, tc.batch_size, tc.queries_per_context, self.ablation, self.loss_cfg.lambda_d,
        )
        stats: StepStats | None = self.history[-1] if self.history else None
        for step in range(self.start_step + 1, tc.steps + 1):
            stats = self.train_step(step)
            if not math.isfinite(stats.total):
                raise self._abort(step, f"non-finite loss {stats.total}")
            try:
                self.optimizer.step()
            except OptimizerError as exc:
                raise self._abort(step, str(exc)) from exc
            self.history.append(stats)
            if step % tc.log_every == 0 or step == 1:
                logger.info("step %d/%d total=%.5f l1=%.5f l_d=%.5f", step, tc.steps, stats.total, stats.l1, stats.l_d)
            if step % tc.checkpoint_every == 0 and step < tc.steps:
                save_checkpoint(self.checkpoint_dir / f"step_{step:06d}", self.model, step, self.meta(), self.optimizer)
                write_curve(self.run_dir / CURVE_NAME, self.history)
        self.model.eval()
        save_checkpoint(final_dir, self.model, tc.steps, self.meta(), self.optimizer)
        curve = self.run_dir / CURVE_NAME
        write_curve(curve, self.history)
        return TrainResult(tc.steps, stats, final_dir, curve)
