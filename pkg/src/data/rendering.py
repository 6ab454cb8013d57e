"""Room sampling and rendering of contexts, echoes and ground-truth query RIRs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

from src.acoustics.geometry import Pose, Query, RoomSpec, depth_scan, sample_points, sample_poses, sample_room
from src.acoustics.noise import add_ambient_noise, mix_at_snr
from src.acoustics.simulator import BinauralRir, simulate_echo, simulate_rir
from src.acoustics.sweep import ess_sweep, measure_rir, record_sweep
from src.config.models import ExperimentConfig
from src.errors import DatasetError
from src.services.worker_pool import run_ordered

from .manifest import ContextEntry, DatasetManifest, ObservationEntry, QueryEntry, RoomEntry

logger = logging.getLogger(__name__)

ECHO_DIR = "echoes"
RIR_DIR = "rirs"


def write_rir(path: Path, rir: BinauralRir) -> None:
    """Two-channel 32-bit float WAV."""
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        sf.write(str(path), rir.samples.T.astype(np.float32), rir.sample_rate, subtype="FLOAT")
    except (OSError, RuntimeError) as exc:
        raise DatasetError(f"cannot write WAV: {exc}", path) from exc


def read_rir(path: Path) -> BinauralRir:
    try:
        data, sample_rate = sf.read(str(path), dtype="float32", always_2d=True)
    except (OSError, RuntimeError) as exc:
        raise DatasetError(f"cannot read WAV: {exc}", path) from exc
    if data.shape[1] != 2:
        raise DatasetError(f"expected 2 channels, found {data.shape[1]}", path)
    return BinauralRir(data.T.astype(np.float64), int(sample_rate))


def room_seed(seed: int, index: int) -> int:
    return int(np.random.default_rng([seed, index]).integers(2**31 - 1))


def sample_rooms(cfg: ExperimentConfig) -> list[RoomEntry]:
    """Seen rooms first, then unseen ones; each room has its own derived seed."""
    ds = cfg.dataset
    rooms = []
    for i in range(ds.n_seen_rooms + ds.n_unseen_rooms):
        split = "seen" if i < ds.n_seen_rooms else "unseen"
        rooms.append(RoomEntry(f"room_{i:03d}", split, sample_room(cfg.rooms, room_seed(cfg.seed, i))))
    return rooms


class EchoAcquisition:
    """Turns a simulated echo into the echo the dataset stores (direct or sweep-measured, optionally noisy)."""

    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.mode = cfg.dataset.echo_acquisition
        self.sweep = ess_sweep(cfg.sweep, cfg.sim.sample_rate) if self.mode == "sweep" else None

    def __call__(self, echo: BinauralRir, rng: np.random.Generator) -> BinauralRir:
        noise = self.cfg.noise
        if self.mode == "direct":
            if noise.enabled:
                return add_ambient_noise(echo, noise.kind, noise.snr_db, rng)
            return echo
        recorded = record_sweep(echo, self.sweep)
        if noise.enabled:
            recorded = mix_at_snr(recorded, noise.snr_db, noise.kind, echo.sample_rate, rng)
        return measure_rir(recorded, self.sweep, self.cfg.sweep, echo.sample_rate, echo.length)


@dataclass(frozen=True)
class ContextJob:
    room_index: int
    context_index: int
    room: RoomEntry


class ContextRenderer:
    def __init__(self, cfg: ExperimentConfig, root: Path) -> None:
        self.cfg = cfg
        self.root = Path(root)
        self.acquire = EchoAcquisition(cfg)

    def _observations(self, room: RoomSpec, poses: list[Pose], prefix: str, rng) -> list[ObservationEntry]:
        ds = self.cfg.dataset
        fov = float(np.deg2rad(ds.fov_deg))
        out = []
        for k, pose in enumerate(poses):
            obs_id = f"{prefix}_obs_{k:02d}"
            rel = f"{ECHO_DIR}/{obs_id}.wav"
            write_rir(self.root / rel, self.acquire(simulate_echo(room, pose, self.cfg.sim), rng))
            out.append(ObservationEntry(obs_id, pose, depth_scan(room, pose, ds.n_rays, fov), rel))
        return out

    def _queries(self, entry: RoomEntry, prefix: str, rng: np.random.Generator) -> list[QueryEntry]:
        ds = self.cfg.dataset
        n = ds.queries_per_context
        sources = sample_points(entry.spec, n, ds.min_wall_clearance, rng)
        receivers = sample_poses(entry.spec, n, ds.min_wall_clearance, rng)
        held_out = set(rng.permutation(n)[: int(round(ds.test_fraction * n))].tolist())
        out = []
        for j, (source, receiver) in enumerate(zip(sources, receivers)):
            query_id = f"{prefix}_q_{j:03d}"
            rel = f"{RIR_DIR}/{query_id}.wav"
            query = Query((float(source[0]), float(source[1])), receiver)
            write_rir(self.root / rel, simulate_rir(entry.spec, query.source, receiver, self.cfg.sim))
            split = "test" if entry.split == "unseen" or j in held_out else "train"
            out.append(QueryEntry(query_id, query, rel, split))
        return out

    def __call__(self, job: ContextJob) -> ContextEntry:
        prefix = f"{job.room.room_id}_ctx_{job.context_index:02d}"
        rng = np.random.default_rng([self.cfg.seed, job.room_index, job.context_index])
        ds = self.cfg.dataset
        poses = sample_poses(job.room.spec, ds.observations_per_context, ds.min_wall_clearance, rng)
        observations = self._observations(job.room.spec, poses, prefix, rng)
        queries = self._queries(job.room, prefix, rng)
        logger.debug("Rendered %s: %d observations, %d queries", prefix, len(observations), len(queries))
        return ContextEntry(prefix, job.room.room_id, observations, queries)


def render_dataset(rooms: list[RoomEntry], cfg: ExperimentConfig, root: Path) -> DatasetManifest:
    """Render every (room, context) work item and write the manifest; deterministic in cfg.seed."""
    cfg.validate()
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create dataset directory: {exc}", root) from exc
    jobs = [
        ContextJob(i, c, room)
        for i, room in enumerate(rooms)
        for c in range(cfg.dataset.contexts_per_room)
    ]
    logger.info("Rendering %d contexts over %d rooms into %s", len(jobs), len(rooms), root)
    contexts = run_ordered(ContextRenderer(cfg, root), jobs, cfg.dataset.workers, label="context")
    manifest = DatasetManifest(
        seed=cfg.seed,
        config={
            "rooms": cfg.rooms.to_dict(),
            "sim": cfg.sim.to_dict(),
            "sweep": cfg.sweep.to_dict(),
            "stft": cfg.stft.to_dict(),
            "noise": cfg.noise.to_dict(),
            "dataset": cfg.dataset.to_dict(),
        },
        rooms=list(rooms),
        contexts=contexts,
    )
    manifest.validate(root)
    manifest.save(root)
    return manifest
