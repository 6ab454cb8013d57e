from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.config.manager import write_json_atomic
from src.config.models import ModelConfig, StftConfig
from src.data.tensor_file import load_named, save_named
from src.errors import DatasetError
from src.nn.optim import Adam
from src.version import APP_VERSION

from .model import FewShotRirModel

logger = logging.getLogger(__name__)

TENSORS_NAME = "model.fsrn"
SIDECAR_NAME = "checkpoint.json"
_OPTIMIZER_PREFIX = "adam/"


@dataclass
class Checkpoint:
    path: Path
    model: FewShotRirModel
    step: int
    meta: dict = field(default_factory=dict)
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def stft(self) -> StftConfig:
        return StftConfig.from_dict(self.meta.get("stft", {}))

    @property
    def ablation(self) -> str:
        return self.meta.get("ablation", "none")

    @property
    def context_size(self) -> int:
        return int(self.meta.get("context_size", 0))

    def restore_optimizer(self, optimizer: Adam) -> None:
        if self.optimizer_state:
            optimizer.load_state_dict(self.optimizer_state)


def save_checkpoint(
    directory: Path, model: FewShotRirModel, step: int, meta: dict, optimizer: Adam | None = None
) -> Path:
    directory = Path(directory)
    tensors = {f"param/{name}": value for name, value in model.state_dict().items()}
    if optimizer is not None:
        tensors.update({f"{_OPTIMIZER_PREFIX}{k}": v for k, v in optimizer.state_dict().items()})
    save_named(directory / TENSORS_NAME, tensors)
    sidecar = {**meta, "model": model.cfg.to_dict(), "step": step, "app_version": APP_VERSION}
    write_json_atomic(directory / SIDECAR_NAME, sidecar)
    logger.info("Saved checkpoint at step %d to %s", step, directory)
    return directory


def load_checkpoint(directory: Path) -> Checkpoint:
    directory = Path(directory)
    sidecar_path = directory / SIDECAR_NAME
    try:
        meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read checkpoint sidecar: {exc}", sidecar_path) from exc
    tensors = load_named(directory / TENSORS_NAME)
    cfg = ModelConfig.from_dict(meta.get("model", {}))
    model = FewShotRirModel(cfg, seed=int(meta.get("seed", 0)))
    model.load_state_dict({k[len("param/"):]: v for k, v in tensors.items() if k.startswith("param/")})
    optimizer_state = {
        k[len(_OPTIMIZER_PREFIX):]: v for k, v in tensors.items() if k.startswith(_OPTIMIZER_PREFIX)
    }
    return Checkpoint(directory, model, int(meta.get("step", 0)), meta, optimizer_state)


def checkpoint_hash(directory: Path) -> str:
    digest = hashlib.sha256()
    for name in (TENSORS_NAME, SIDECAR_NAME):
        path = Path(directory) / name
        try:
            digest.update(path.read_bytes())
        except OSError as exc:
            raise DatasetError(f"cannot hash checkpoint: {exc}", path) from exc
    return digest.hexdigest()
