from __future__ import annotations

import argparse
import logging
from pathlib import Path

from src.acoustics.noise import NOISE_KINDS
from src.data.dataset import RirDataset
from src.data.rendering import render_dataset, sample_rooms

from .base import CommandBase, CommandContext

logger = logging.getLogger(__name__)


class GenerateCommand(CommandBase):
    name = "generate"
    help = "Sample rooms and render contexts, queries and the dataset manifest."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out", type=Path, required=True, help="dataset directory")
        parser.add_argument(
            "--with-ambient-noise", action="store_true", help="add ambient noise to echoes (queries stay clean)"
        )
        parser.add_argument("--noise-kind", choices=NOISE_KINDS, default=None)
        parser.add_argument("--snr-db", type=float, default=None)
        parser.add_argument("--echo-acquisition", choices=("direct", "sweep"), default=None)
        parser.add_argument("--no-feature-cache", action="store_true", help="skip writing pooled echo features")

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.out

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        cfg = ctx.config()
        if args.with_ambient_noise:
            cfg.noise.enabled = True
        if args.noise_kind is not None:
            cfg.noise.kind = args.noise_kind
        if args.snr_db is not None:
            cfg.noise.snr_db = args.snr_db
        if args.echo_acquisition is not None:
            cfg.dataset.echo_acquisition = args.echo_acquisition

        manifest = render_dataset(sample_rooms(cfg), cfg, args.out)
        if not args.no_feature_cache:
            RirDataset(args.out, manifest).write_feature_cache(cfg.model.echo_bands, cfg.model.echo_time_bins)

        seen = len(manifest.contexts_in("seen"))
        unseen = len(manifest.contexts_in("unseen"))
        ctx.echo(f"Dataset written to {args.out}")
        ctx.echo(f"  rooms:    {len(manifest.rooms)} ({cfg.dataset.n_seen_rooms} seen, {cfg.dataset.n_unseen_rooms} unseen)")
        ctx.echo(f"  contexts: {seen} seen, {unseen} unseen")
        ctx.echo(f"  queries:  {manifest.n_queries()}")
        if cfg.noise.enabled:
            ctx.echo(f"  echoes carry {cfg.noise.kind} noise at {cfg.noise.snr_db:g} dB SNR")
        return 0
