from __future__ import annotations

import argparse
import logging

from src.errors import ConfigurationError, RirToolkitError

from .base import CommandBase, CommandContext

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_TOOLKIT_ERROR = 2


class CommandRegistry:
    def __init__(self) -> None:
        self._commands: dict[str, CommandBase] = {}

    def register(self, command: CommandBase) -> None:
        self._commands[command.name] = command
        logger.debug("Registered command: %s", command.name)

    def available(self) -> list[str]:
        return list(self._commands)

    def get(self, name: str) -> CommandBase:
        command = self._commands.get(name)
        if command is None:
            raise ConfigurationError(f"unknown command '{name}'")
        return command

    def add_subparsers(self, parser: argparse.ArgumentParser) -> None:
        sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
        for command in self._commands.values():
            command.add_arguments(sub.add_parser(command.name, help=command.help, description=command.help))

    def execute(self, name: str, ctx: CommandContext) -> int:
        """Run a command; toolkit errors exit 2, anything unexpected exits 1."""
        try:
            command = self.get(name)
            return command.run(ctx) or EXIT_OK
        except RirToolkitError as exc:
            logger.exception("Command %s failed: %s", name, exc)
            return EXIT_TOOLKIT_ERROR
        except Exception:
            logger.exception("Command %s crashed", name)
            return EXIT_FAILED


def default_registry() -> CommandRegistry:
    from .error_map import ErrorMapCommand
    from .evaluate import EvaluateCommand
    from .generate import GenerateCommand
    from .gradcheck import GradCheckCommand
    from .sweep_context import SweepContextCommand
    from .train import TrainCommand

    registry = CommandRegistry()
    registry.register(GenerateCommand())
    registry.register(TrainCommand())
    registry.register(EvaluateCommand())
    registry.register(ErrorMapCommand())
    registry.register(SweepContextCommand())
    registry.register(GradCheckCommand())
    return registry
