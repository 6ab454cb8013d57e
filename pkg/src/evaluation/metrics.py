"""Per-query metrics and the evaluation loop over a dataset."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from src.acoustics.analysis import drre, rte, stft_error
from src.acoustics.dsp import Spectrogram, reconstruct_waveform
from src.acoustics.localization import localize_source
from src.config.models import EvalConfig, SimConfig
from src.data.dataset import RirDataset
from src.data.manifest import ContextEntry, QueryEntry
from src.errors import InsufficientDecayError, LocalizationError
from src.predictors.base import Prediction, PredictionRequest, PredictorBase
from src.predictors.registry import PredictorRegistry
from src.services.worker_pool import run_ordered

from .report import EvalReport, MetricRow

logger = logging.getLogger(__name__)

NAN = float("nan")


@dataclass(frozen=True)
class QueryMetrics:
    stft: float
    rte: float
    drre: float
    sle: float


def query_metrics(
    prediction: Prediction,
    target: Spectrogram,
    query: QueryEntry,
    sim: SimConfig,
    eval_cfg: EvalConfig,
) -> QueryMetrics:
    """STFT error and RTE on spectrograms; DRRE on zero-phase resyntheses of both sides;
    SLE on the predicted waveform when the predictor has one, otherwise on its resynthesis."""
    pred_spec = prediction.spectrogram
    length = sim.rir_samples
    stft = stft_error(pred_spec, target)
    try:
        rt = rte(pred_spec, target)
    except InsufficientDecayError as exc:
        logger.debug("RTE undefined for %s: %s", query.query_id, exc)
        rt = NAN
    pred_wave = reconstruct_waveform(pred_spec, length)
    try:
        dr = drre(pred_wave, reconstruct_waveform(target, length), eval_cfg.direct_window_ms)
    except ValueError as exc:
        logger.debug("DRRE undefined for %s: %s", query.query_id, exc)
        dr = NAN
    sle = NAN
    if eval_cfg.localize:
        wave = prediction.waveform if prediction.waveform is not None else pred_wave
        try:
            sle = localize_source(wave, query.query.receiver, sim).error_to(query.query.source)
        except LocalizationError as exc:
            logger.debug("Localization failed for %s: %s", query.query_id, exc)
    return QueryMetrics(stft, rt, dr, sle)


def evaluation_queries(ctx: ContextEntry, room_split: str) -> list[QueryEntry]:
    """Held-out queries of seen rooms; every query of unseen rooms."""
    return ctx.queries if room_split == "unseen" else ctx.queries_in("test")


class Evaluator:
    def __init__(
        self,
        dataset: RirDataset,
        predictor: PredictorBase,
        eval_cfg: EvalConfig,
        context_size: int = 0,
        splits: tuple[str, ...] = ("seen", "unseen"),
    ) -> None:
        self.dataset = dataset
        self.predictor = predictor
        self.eval_cfg = eval_cfg
        self.context_size = context_size
        self.splits = splits

    def _context_rows(self, ctx: ContextEntry) -> list[MetricRow]:
        split = self.dataset.manifest.room_split(ctx.room_id)
        queries = evaluation_queries(ctx, split)
        if not queries:
            return []
        request = PredictionRequest(self.dataset, ctx, queries, self.context_size)
        # Predictions are complete before any target is read.
        predictions = PredictorRegistry.run(self.predictor, request)
        rows = []
        for query, prediction in zip(queries, predictions):
            m = query_metrics(prediction, self.dataset.target_spectrogram(query), query, self.dataset.sim, self.eval_cfg)
            rows.append(MetricRow(split, ctx.room_id, ctx.context_id, query.query_id, m.stft, m.rte, m.drre, m.sle))
        return rows

    def run(self, metadata: dict | None = None) -> EvalReport:
        contexts = [c for split in self.splits for c in self.dataset.manifest.contexts_in(split)]
        logger.info("Evaluating %s on %d contexts", self.predictor.name, len(contexts))
        per_context = run_ordered(self._context_rows, contexts, self.eval_cfg.workers, label="context")
        rows = [row for chunk in per_context for row in chunk]
        meta = {**self.predictor.describe(), "context_size": self.context_size, **(metadata or {})}
        report = EvalReport.from_rows(rows, meta)
        for split, agg in report.aggregates.items():
            logger.info(
                "%s: stft=%.4f rte=%.4f drre=%.3f sle=%.3f (%d queries)",
                split, agg["stft"], agg["rte"], agg["drre"], agg["sle"], agg["count"],
            )
        return report
