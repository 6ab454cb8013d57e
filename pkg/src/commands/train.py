from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from src.learning.checkpoint import load_checkpoint
from src.learning.model import FewShotRirModel, model_summary
from src.learning.trainer import Trainer

from .base import CommandBase, CommandContext, open_dataset, require_same

logger = logging.getLogger(__name__)


class TrainCommand(CommandBase):
    name = "train"
    help = "Train the few-shot predictor on the seen rooms of a dataset."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--dataset", type=Path, required=True)
        parser.add_argument("--run-dir", type=Path, required=True)
        ablation = parser.add_mutually_exclusive_group()
        ablation.add_argument("--no-echo", action="store_true", help="drop the echo tokens")
        ablation.add_argument("--no-vision", action="store_true", help="drop the depth-scan tokens")
        ablation.add_argument("--no-ld", action="store_true", help="train without the energy-decay loss")
        parser.add_argument("--context-size", type=int, default=None, help="observations per context (0 = all)")
        parser.add_argument("--head", choices=("spectrogram", "acoustic-params"), default=None)
        parser.add_argument("--steps", type=int, default=None)
        parser.add_argument("--resume", type=Path, default=None, help="checkpoint directory to continue from")

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.run_dir

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        cfg = ctx.config()
        if args.no_echo:
            cfg.train.ablation = "no_echo"
        elif args.no_vision:
            cfg.train.ablation = "no_vision"
        elif args.no_ld:
            cfg.train.ablation = "no_ld"
        if args.context_size is not None:
            cfg.train.context_size = args.context_size
        if args.steps is not None:
            cfg.train.steps = args.steps
        if args.head is not None:
            cfg.model = replace(cfg.model, head=args.head.replace("-", "_"))
        cfg.validate()

        dataset = open_dataset(args.dataset, cfg)
        resume = None
        if args.resume is not None:
            resume = load_checkpoint(args.resume)
            require_same("model config", resume.model.cfg.to_dict(), cfg.model.to_dict())
            require_same("ablation", {"ablation": resume.ablation}, {"ablation": cfg.train.ablation})
            model = resume.model
        else:
            model = FewShotRirModel(cfg.model, seed=cfg.train.seed)
        logger.info("Model: %s", model_summary(model))

        result = Trainer(model, dataset, cfg, args.run_dir, resume=resume).train()
        ctx.echo(f"Trained {result.steps} steps ({model_summary(model)})")
        if result.final is not None:
            f = result.final
            ctx.echo(f"  final loss {f.total:.5f} (l1 {f.l1:.5f}, l_d {f.l_d:.5f})")
        ctx.echo(f"  checkpoint: {result.checkpoint}")
        ctx.echo(f"  loss curve: {result.curve}")
        return 0
