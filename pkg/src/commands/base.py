from __future__ import annotations

import argparse
import sys
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from src.config.manager import ConfigManager, config_diff
from src.config.models import ExperimentConfig
from src.data.dataset import RirDataset
from src.errors import ConfigMismatchError


@dataclass
class CommandContext:
    args: argparse.Namespace
    run_dir: Path
    config_manager: ConfigManager = field(default_factory=ConfigManager)
    out: TextIO = field(default_factory=lambda: sys.stdout)
    _config: ExperimentConfig | None = None

    def config(self) -> ExperimentConfig:
        """Layered config with --seed applied to generation and training alike."""
        if self._config is None:
            cfg = self.config_manager.load(getattr(self.args, "config", None), getattr(self.args, "preset", None))
            seed = getattr(self.args, "seed", None)
            if seed is not None:
                cfg.seed = seed
                cfg.train.seed = seed
            self._config = cfg
        return self._config

    def echo(self, text: str = "") -> None:
        print(text, file=self.out)


def require_same(what: str, expected: dict, found: dict) -> None:
    differences = config_diff(expected, found)
    if differences:
        raise ConfigMismatchError(f"{what} differs", differences)


class CommandBase(ABC):
    name: str = ""
    help: str = ""

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        pass

    @abstractmethod
    def run_dir(self, args: argparse.Namespace) -> Path:
        """Directory the command owns: holds run.log and the lock file."""
        ...

    @abstractmethod
    def run(self, ctx: CommandContext) -> int:
        ...


def open_dataset(root: Path, cfg: ExperimentConfig | None = None) -> RirDataset:
    """Open and validate a dataset; with a config, its sim and STFT sections must match the manifest."""
    dataset = RirDataset.open(root)
    if cfg is not None:
        require_same("sim config", dataset.manifest.config.get("sim", {}), cfg.sim.to_dict())
        require_same("stft config", dataset.manifest.config.get("stft", {}), cfg.stft.to_dict())
    return dataset
