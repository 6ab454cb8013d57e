from __future__ import annotations

import argparse
import logging
import time
from pathlib import Path

from src.config.manager import write_json_atomic
from src.learning.gradient_suite import run_suite

from .base import CommandBase, CommandContext
from .registry import EXIT_FAILED, EXIT_OK

logger = logging.getLogger(__name__)


class GradCheckCommand(CommandBase):
    name = "gradcheck"
    help = "Compare analytic gradients of the losses and the model with central differences."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out", type=Path, default=Path("runs/gradcheck"))
        parser.add_argument("--instances", type=int, default=100, help="random instances per loss")
        parser.add_argument("--model-instances", type=int, default=3)
        parser.add_argument("--tolerance", type=float, default=1e-4)

    def run_dir(self, args: argparse.Namespace) -> Path:
        return args.out

    def run(self, ctx: CommandContext) -> int:
        args = ctx.args
        seed = args.seed if args.seed is not None else 0
        started = time.monotonic()
        results = run_suite(args.instances, args.model_instances, args.tolerance, seed)
        elapsed = time.monotonic() - started
        passed = all(r.report.passed for r in results)
        write_json_atomic(
            args.out / "gradcheck.json",
            {"seed": seed, "passed": passed, "checks": [r.to_dict() for r in results]},
        )
        for r in results:
            status = "ok" if r.report.passed else "FAILED"
            ctx.echo(f"{r.name:<13} {len(r.report.entries):>5} entries  max rel error {r.report.max_rel_error:.2e}  {status}")
        ctx.echo(f"finished in {elapsed:.1f} s")
        if not passed:
            logger.error("Gradient check exceeded tolerance %g", args.tolerance)
            return EXIT_FAILED
        return EXIT_OK
