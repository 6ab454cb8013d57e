from __future__ import annotations

import argparse
import logging
from pathlib import Path

from src.acoustics.geometry import Pose
from src.data.manifest import ContextEntry, DatasetManifest
from src.errors import ConfigurationError
from src.evaluation.error_map import compute_error_map

from .base import CommandBase, CommandContext, open_dataset
from .evaluate import add_predictor_arguments, build_predictor, report_stem

logger = logging.getLogger(__name__)


def pick_context(manifest: DatasetManifest, context_id: str | None) -> ContextEntry:
    if context_id is not None:
        return manifest.context(context_id)
    unseen = manifest.contexts_in("unseen")
    candidates = unseen or manifest.contexts
    if not candidates:
        raise ConfigurationError("the dataset has no contexts")
    return candidates[0]


def default_receiver(context: ContextEntry) -> Pose:
    """The first query's receiver, or the anchor pose when the context has no queries."""
    return context.queries[0].query.receiver if context.queries else context.anchor


class ErrorMapCommand(CommandBase):
    name = "error-map"
    help = "STFT error over a grid of source positions for one fixed receiver."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--out", type=Path, required=True)
        add_predictor_arguments(parser)
        parser.add_argument("--context", default=None, help="context id (default: first unseen-room context)")
        parser.add_argument(
            "--receiver", nargs=3, type=float, metavar=("X", "Y", "THETA"), default=None, help="receiver pose"
        )
        parser.add_argument("--step", type=float, default=0.25, help="grid spacing in meters")
        parser.add_argument("--clearance", type=float, default=None, help="distance kept from walls")
        parser.add_argument("--context-size", type=int, default=0)

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.out

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        cfg = ctx.config()
        dataset = open_dataset(args.dataset)
        predictor = build_predictor(args, cfg, dataset)
        context = pick_context(dataset.manifest, args.context)
        receiver = Pose(*args.receiver) if args.receiver is not None else default_receiver(context)
        error_map = compute_error_map(
            dataset, predictor, context, receiver, args.step, args.clearance, args.context_size, cfg.eval.workers
        )
        csv_path, _ = error_map.save(args.out, f"error_map_{report_stem(predictor, args)}_{context.context_id}")
        ctx.echo(f"Error map for {context.context_id}: {error_map.values.shape[0]} sources")
        ctx.echo(f"  min {error_map.vmin:.4f}  median {error_map.median:.4f}  max {error_map.vmax:.4f}")
        ctx.echo(f"  values: {csv_path}")
        return 0
