from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .commands.base import CommandContext
from .commands.registry import EXIT_TOOLKIT_ERROR, CommandRegistry, default_registry
from .config.manager import ConfigManager
from .errors import RunLockedError
from .services.resource_monitor import ResourceMonitor
from .services.run_lock import RunLock
from .version import APP_NAME, APP_VERSION

logger = logging.getLogger(__name__)

LOG_NAME = "run.log"


class EchoFieldApp:
    def __init__(self, argv: list[str], registry: CommandRegistry | None = None) -> None:
        self._registry = registry or default_registry()
        self._config_manager = ConfigManager()
        self._parser = self._build_parser()
        self._args = self._parser.parse_args(argv)
        self._handlers: list[logging.Handler] = []

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=APP_NAME.lower(), description=f"{APP_NAME} {APP_VERSION}")
        parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
        parser.add_argument(
            "--preset", default=None, help=f"named preset ({', '.join(self._config_manager.available_presets())})"
        )
        parser.add_argument("--config", type=Path, default=None, help="JSON file layered over the defaults")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
        parser.add_argument("--monitor-interval", type=float, default=30.0, help="seconds between resource logs")
        self._registry.add_subparsers(parser)
        return parser

    def _setup_logging(self, run_dir: Path) -> None:
        log_format = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
        handlers: list[logging.Handler] = []

        # File log in the run directory
        run_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(run_dir / LOG_NAME, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(log_format))
        handlers.append(file_handler)

        # Console log only when a console exists
        if sys.stderr is not None:
            handlers.append(logging.StreamHandler(sys.stderr))

        logging.basicConfig(
            level=logging.DEBUG if self._args.verbose else logging.INFO,
            format=log_format,
            handlers=handlers,
            force=True,
        )
        self._handlers = handlers

    def run(self) -> int:
        command = self._registry.get(self._args.command)
        run_dir = Path(command.run_dir(self._args))
        self._setup_logging(run_dir)
        logger.info("%s %s: %s", APP_NAME, APP_VERSION, self._args.command)

        ctx = CommandContext(self._args, run_dir, self._config_manager)
        monitor = ResourceMonitor(self._args.monitor_interval)
        try:
            with RunLock(run_dir):
                monitor.start()
                try:
                    return self._registry.execute(self._args.command, ctx)
                finally:
                    monitor.stop()
        except RunLockedError as exc:
            logger.error("%s", exc)
            return EXIT_TOOLKIT_ERROR

    def cleanup(self) -> None:
        for handler in self._handlers:
            handler.flush()
            if isinstance(handler, logging.FileHandler):
                logging.getLogger().removeHandler(handler)
                handler.close()
        self._handlers = []
