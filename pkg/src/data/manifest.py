from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.acoustics.geometry import DepthScan, Pose, Query, RoomSpec
from src.config.manager import write_json_atomic
from src.config.models import DatasetConfig, SimConfig, StftConfig, SweepConfig
from src.errors import DatasetError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
SPLITS = ("seen", "unseen")
QUERY_SPLITS = ("train", "test")


@dataclass(frozen=True)
class RoomEntry:
    room_id: str
    split: str
    spec: RoomSpec

    def to_dict(self) -> dict:
        return {"room_id": self.room_id, "split": self.split, "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> RoomEntry:
        return cls(data["room_id"], data["split"], RoomSpec.from_dict(data["spec"]))


@dataclass(frozen=True)
class ObservationEntry:
    obs_id: str
    pose: Pose
    depth: DepthScan
    echo_file: str

    def to_dict(self) -> dict:
        return {
            "obs_id": self.obs_id,
            "pose": self.pose.to_dict(),
            "depth": [float(r) for r in self.depth.ranges],
            "fov": self.depth.fov,
            "echo_file": self.echo_file,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ObservationEntry:
        return cls(
            obs_id=data["obs_id"],
            pose=Pose.from_dict(data["pose"]),
            depth=DepthScan(np.asarray(data["depth"], dtype=np.float64), float(data["fov"])),
            echo_file=data["echo_file"],
        )


@dataclass(frozen=True)
class QueryEntry:
    query_id: str
    query: Query
    rir_file: str
    split: str = "test"

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, **self.query.to_dict(), "rir_file": self.rir_file, "split": self.split}

    @classmethod
    def from_dict(cls, data: dict) -> QueryEntry:
        return cls(data["query_id"], Query.from_dict(data), data["rir_file"], data.get("split", "test"))


@dataclass(frozen=True)
class ContextEntry:
    context_id: str
    room_id: str
    observations: list[ObservationEntry] = field(default_factory=list)
    queries: list[QueryEntry] = field(default_factory=list)

    @property
    def anchor(self) -> Pose:
        return self.observations[0].pose

    def queries_in(self, split: str | None) -> list[QueryEntry]:
        return [q for q in self.queries if split is None or q.split == split]

    def to_dict(self) -> dict:
        return {
            "context_id": self.context_id,
            "room_id": self.room_id,
            "observations": [o.to_dict() for o in self.observations],
            "queries": [q.to_dict() for q in self.queries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ContextEntry:
        return cls(
            data["context_id"],
            data["room_id"],
            [ObservationEntry.from_dict(o) for o in data["observations"]],
            [QueryEntry.from_dict(q) for q in data["queries"]],
        )


@dataclass
class DatasetManifest:
    seed: int
    config: dict
    rooms: list[RoomEntry] = field(default_factory=list)
    contexts: list[ContextEntry] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    @property
    def sim(self) -> SimConfig:
        return SimConfig.from_dict(self.config.get("sim", {}))

    @property
    def stft(self) -> StftConfig:
        return StftConfig.from_dict(self.config.get("stft", {}))

    @property
    def sweep(self) -> SweepConfig:
        return SweepConfig.from_dict(self.config.get("sweep", {}))

    @property
    def dataset(self) -> DatasetConfig:
        return DatasetConfig.from_dict(self.config.get("dataset", {}))

    def room(self, room_id: str) -> RoomEntry:
        for entry in self.rooms:
            if entry.room_id == room_id:
                return entry
        raise DatasetError(f"unknown room '{room_id}'")

    def context(self, context_id: str) -> ContextEntry:
        for entry in self.contexts:
            if entry.context_id == context_id:
                return entry
        raise DatasetError(f"unknown context '{context_id}'")

    def room_split(self, room_id: str) -> str:
        return self.room(room_id).split

    def contexts_in(self, split: str | None = None) -> list[ContextEntry]:
        splits = {r.room_id: r.split for r in self.rooms}
        return [c for c in self.contexts if split is None or splits[c.room_id] == split]

    def n_queries(self) -> int:
        return sum(len(c.queries) for c in self.contexts)

    def validate(self, root: Path | None = None) -> None:
        """Unique ids, known split labels, disjoint room splits and, with a root, existing files."""
        room_ids = [r.room_id for r in self.rooms]
        if len(set(room_ids)) != len(room_ids):
            raise DatasetError("duplicate room ids in manifest")
        for r in self.rooms:
            if r.split not in SPLITS:
                raise DatasetError(f"room '{r.room_id}' has unknown split '{r.split}'")
        ids: set[str] = set()
        for ctx in self.contexts:
            if ctx.room_id not in room_ids:
                raise DatasetError(f"context '{ctx.context_id}' refers to unknown room '{ctx.room_id}'")
            if not ctx.observations:
                raise DatasetError(f"context '{ctx.context_id}' has no observations")
            names = [ctx.context_id] + [o.obs_id for o in ctx.observations] + [q.query_id for q in ctx.queries]
            for name in names:
                if name in ids:
                    raise DatasetError(f"duplicate id '{name}' in manifest")
                ids.add(name)
            for q in ctx.queries:
                if q.split not in QUERY_SPLITS:
                    raise DatasetError(f"query '{q.query_id}' has unknown split '{q.split}'")
            if root is not None:
                for rel in [o.echo_file for o in ctx.observations] + [q.rir_file for q in ctx.queries]:
                    if not (root / rel).is_file():
                        raise DatasetError("referenced file is missing", root / rel)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "rooms": [r.to_dict() for r in self.rooms],
            "contexts": [c.to_dict() for c in self.contexts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> DatasetManifest:
        version = int(data.get("version", MANIFEST_VERSION))
        if version != MANIFEST_VERSION:
            raise DatasetError(f"unsupported manifest version {version}")
        return cls(
            seed=int(data["seed"]),
            config=dict(data.get("config", {})),
            rooms=[RoomEntry.from_dict(r) for r in data.get("rooms", [])],
            contexts=[ContextEntry.from_dict(c) for c in data.get("contexts", [])],
            version=version,
        )

    def save(self, root: Path) -> Path:
        path = Path(root) / MANIFEST_NAME
        try:
            write_json_atomic(path, self.to_dict())
        except OSError as exc:
            raise DatasetError(f"cannot write manifest: {exc}", path) from exc
        logger.info("Wrote manifest with %d contexts, %d queries", len(self.contexts), self.n_queries())
        return path

    @classmethod
    def load(cls, root: Path) -> DatasetManifest:
        root = Path(root)
        path = root / MANIFEST_NAME if root.is_dir() else root
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read manifest: {exc}", path) from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed manifest: {exc}", path) from exc
