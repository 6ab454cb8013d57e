from __future__ import annotations

import argparse
import copy
import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from src.config.manager import write_json_atomic
from src.evaluation.metrics import Evaluator
from src.learning.checkpoint import Checkpoint, load_checkpoint
from src.learning.model import FewShotRirModel
from src.learning.trainer import Trainer
from src.predictors.fewshot import FewShotPredictor

from .base import CommandBase, CommandContext, open_dataset

logger = logging.getLogger(__name__)

SWEEP_FIELDS = ("seed", "context_size", "split", "stft", "rte", "count")


@dataclass(frozen=True)
class SweepPoint:
    seed: int
    context_size: int
    split: str
    stft: float
    rte: float
    count: int

    def row(self) -> list[str]:
        return [str(self.seed), str(self.context_size), self.split, repr(self.stft), repr(self.rte), str(self.count)]


def sweep_csv(points: list[SweepPoint]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for p in points:
        writer.writerow(p.row())
    return buffer.getvalue()


def trend_holds(points: list[SweepPoint]) -> dict[str, bool]:
    """Per seed and split: error with the smallest context is no lower than with the largest."""
    out = {}
    for seed in sorted({p.seed for p in points}):
        for split in sorted({p.split for p in points}):
            chunk = sorted((p for p in points if p.seed == seed and p.split == split), key=lambda p: p.context_size)
            if len(chunk) >= 2:
                out[f"seed{seed}/{split}"] = chunk[0].stft >= chunk[-1].stft
    return out


class SweepContextCommand(CommandBase):
    name = "sweep-context"
    help = "STFT error as a function of context size, over several training seeds."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--run-dir", type=Path, required=True)
        parser.add_argument("--sizes", nargs="+", type=int, default=[1, 5, 10, 20])
        parser.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
        parser.add_argument(
            "--checkpoint", type=Path, default=None, help="evaluate one trained model at every size instead of training"
        )

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.run_dir

    def _evaluate(self, ctx: CommandContext, dataset, checkpoint: Checkpoint, seed: int, size: int) -> list[SweepPoint]:
        cfg = ctx.config()
        report = Evaluator(dataset, FewShotPredictor(checkpoint), replace(cfg.eval, localize=False), size).run()
        return [
            SweepPoint(seed, size, split, agg["stft"], agg["rte"], int(agg["count"]))
            for split, agg in report.aggregates.items()
        ]

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        base = ctx.config()
        dataset = open_dataset(args.dataset, base)
        points: list[SweepPoint] = []
        if args.checkpoint is not None:
            checkpoint = load_checkpoint(args.checkpoint)
            for size in args.sizes:
                points.extend(self._evaluate(ctx, dataset, checkpoint, int(checkpoint.meta.get("seed", 0)), size))
        else:
            for seed in args.seeds:
                for size in args.sizes:
                    cfg = copy.deepcopy(base)
                    cfg.train = replace(cfg.train, seed=seed, context_size=size)
                    run_dir = args.run_dir / f"n{size:02d}_seed{seed}"
                    logger.info("Training context size %d, seed %d", size, seed)
                    result = Trainer(FewShotRirModel(cfg.model, seed=seed), dataset, cfg, run_dir).train()
                    points.extend(self._evaluate(ctx, dataset, load_checkpoint(result.checkpoint), seed, size))

        csv_path = args.run_dir / "context_sweep.csv"
        tmp = csv_path.with_suffix(".csv.tmp")
        tmp.write_text(sweep_csv(points), encoding="utf-8")
        tmp.replace(csv_path)
        trends = trend_holds(points)
        write_json_atomic(args.run_dir / "context_sweep.json", {"sizes": args.sizes, "trend_holds": trends})

        ctx.echo(f"{'seed':>4} {'size':>4} {'split':<7} {'stft':>8} {'rte':>8}")
        for p in points:
            ctx.echo(f"{p.seed:>4} {p.context_size:>4} {p.split:<7} {p.stft:8.4f} {p.rte:8.4f}")
        for key, ok in trends.items():
            ctx.echo(f"  {key}: {'nonincreasing' if ok else 'NOT nonincreasing'}")
        ctx.echo(f"  table: {csv_path}")
        return 0
