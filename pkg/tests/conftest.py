from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from src.acoustics.geometry import Pose, RoomSpec
from src.config.manager import ConfigManager
from src.config.models import (
    DatasetConfig,
    ExperimentConfig,
    ModelConfig,
    SimConfig,
    StftConfig,
    TrainConfig,
)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def room() -> RoomSpec:
    return RoomSpec(
        width=5.0,
        depth=4.0,
        height=3.0,
        wall_absorption=(0.4, 0.4, 0.4, 0.4, 0.4, 0.4),
        agent_height=1.5,
    )


@pytest.fixture
def sim_cfg() -> SimConfig:
    return SimConfig(sample_rate=8000, max_reflection_order=8, rir_length=0.25)


@pytest.fixture
def stft_cfg() -> StftConfig:
    return StftConfig(sample_rate=8000, win_len_ms=15.875, hop_ms=7.875, fft_size=127)


@pytest.fixture
def pose() -> Pose:
    return Pose(2.0, 1.5, math.pi / 3)


def tiny_model_cfg(**overrides) -> ModelConfig:
    values = dict(
        d_model=16,
        n_enc_layers=1,
        n_dec_layers=1,
        n_heads=2,
        ffn_hidden=32,
        dropout=0.0,
        pe_frequencies=4,
        modality_dim=4,
        n_rays=8,
        depth_hidden=16,
        depth_dim=8,
        echo_bands=4,
        echo_time_bins=4,
        echo_hidden=16,
        echo_dim=8,
        head_hidden_dims=(32,),
        output_shape=(2, 64, 32),
        dtype="float64",
    )
    values.update(overrides)
    return ModelConfig(**values)


def tiny_experiment(seed: int = 0) -> ExperimentConfig:
    """Two small rooms, 0.25 s RIRs at 8 kHz: spectrograms are 2 x 64 x 32."""
    cfg = ConfigManager().load(environ={})
    cfg.seed = seed
    cfg.sim = SimConfig(sample_rate=8000, max_reflection_order=6, rir_length=0.25)
    cfg.dataset = DatasetConfig(
        n_seen_rooms=1,
        n_unseen_rooms=1,
        contexts_per_room=2,
        queries_per_context=6,
        observations_per_context=4,
        test_fraction=0.5,
        n_rays=8,
        workers=1,
    )
    cfg.model = tiny_model_cfg()
    cfg.train = TrainConfig(steps=3, batch_size=2, queries_per_context=3, lr=1e-3, log_every=1, checkpoint_every=2)
    cfg.eval.workers = 1
    cfg.validate()
    return cfg


@pytest.fixture
def experiment() -> ExperimentConfig:
    return tiny_experiment()


@pytest.fixture(scope="session")
def rendered_dataset(tmp_path_factory) -> Path:
    from src.data.rendering import render_dataset, sample_rooms

    cfg = tiny_experiment()
    root = tmp_path_factory.mktemp("dataset")
    render_dataset(sample_rooms(cfg), cfg, root)
    return root


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def experiment_file(tmp_path, experiment) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(experiment.to_dict()), encoding="utf-8")
    return path
