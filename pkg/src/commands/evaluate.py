from __future__ import annotations

import argparse
import logging
import math
from pathlib import Path

from src.config.models import ExperimentConfig
from src.data.dataset import RirDataset
from src.evaluation.metrics import Evaluator
from src.evaluation.report import METRICS, EvalReport
from src.learning.checkpoint import load_checkpoint
from src.predictors.base import PredictorBase
from src.predictors.registry import default_registry

from .base import CommandBase, CommandContext, open_dataset, require_same

logger = logging.getLogger(__name__)

BASELINES = ("nearest_neighbor", "linear_interpolation", "analytical_rir")


def add_predictor_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", type=Path, help="trained few-shot model")
    source.add_argument("--baseline", choices=BASELINES)
    source.add_argument("--ground-truth", action="store_true", help="score the true RIRs (upper bound)")
    parser.add_argument("--estimator", choices=("oracle", "learned"), default="oracle", help="analytical_rir parameters")
    parser.add_argument("--param-checkpoint", type=Path, default=None, help="acoustic-params model for --estimator learned")


def build_predictor(args: argparse.Namespace, cfg: ExperimentConfig, dataset: RirDataset) -> PredictorBase:
    """Predictor named by the flags; checkpoints must share the dataset's STFT layout."""
    registry = default_registry()
    stft = dataset.stft.to_dict()
    if args.checkpoint is not None:
        checkpoint = load_checkpoint(args.checkpoint)
        require_same("checkpoint stft config", stft, checkpoint.stft.to_dict())
        return registry.create("fewshot", checkpoint=checkpoint)
    if args.ground_truth:
        return registry.create("ground_truth")
    if args.baseline == "analytical_rir" and args.estimator == "learned" and args.param_checkpoint is not None:
        require_same("checkpoint stft config", stft, load_checkpoint(args.param_checkpoint).stft.to_dict())
    return registry.create(
        args.baseline,
        weighting=cfg.eval.interpolation_weighting,
        estimator=args.estimator,
        checkpoint=args.param_checkpoint,
        direct_window_ms=cfg.eval.direct_window_ms,
        seed=cfg.eval.analytical_seed,
    )


def report_stem(predictor: PredictorBase, args: argparse.Namespace) -> str:
    if predictor.name == "analytical_rir":
        return f"{predictor.name}_{args.estimator}"
    return predictor.name


def format_report(report: EvalReport) -> list[str]:
    lines = [f"{'split':<8} {'n':>5} " + " ".join(f"{m:>9}" for m in METRICS)]
    for split, agg in report.aggregates.items():
        values = " ".join("      n/a" if math.isnan(agg[m]) else f"{agg[m]:9.4f}" for m in METRICS)
        lines.append(f"{split:<8} {int(agg['count']):>5} {values}")
    return lines


class EvaluateCommand(CommandBase):
    name = "eval"
    help = "Score a checkpoint or a baseline on the held-out queries of a dataset."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--out", type=Path, required=True, help="report directory")
        add_predictor_arguments(parser)
        parser.add_argument("--context-size", type=int, default=0, help="observations per context (0 = all)")
        parser.add_argument("--splits", nargs="+", choices=("seen", "unseen"), default=["seen", "unseen"])
        parser.add_argument("--no-localize", action="store_true", help="skip source localization (SLE)")

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.out

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        cfg = ctx.config()
        if args.no_localize:
            cfg.eval.localize = False
        dataset = open_dataset(args.dataset)
        predictor = build_predictor(args, cfg, dataset)
        evaluator = Evaluator(dataset, predictor, cfg.eval, args.context_size, tuple(args.splits))
        report = evaluator.run({"dataset_seed": dataset.manifest.seed, "eval": cfg.eval.to_dict()})
        report.verify()
        csv_path, json_path = report.save(args.out, report_stem(predictor, args))
        ctx.echo(f"Evaluated {predictor.name} on {len(report.rows)} queries")
        for line in format_report(report):
            ctx.echo("  " + line)
        ctx.echo(f"  rows: {csv_path}")
        ctx.echo(f"  summary: {json_path}")
        return 0
