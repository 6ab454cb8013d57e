import csv
from dataclasses import replace

import numpy as np
import pytest

from src.data.dataset import RirDataset
from src.errors import ConfigurationError, OptimizerError, TrainingAborted
from src.learning.checkpoint import load_checkpoint
from src.learning.model import FewShotRirModel
from src.learning.trainer import CURVE_NAME, Trainer, effective_loss_config


@pytest.fixture
def dataset(rendered_dataset):
    return RirDataset.open(rendered_dataset)


def read_rows(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def test_training_writes_checkpoints_and_curve(experiment, dataset, tmp_path):
    model = FewShotRirModel(experiment.model, seed=0)
    result = Trainer(model, dataset, experiment, tmp_path / "run").train()
    assert result.steps == 3
    assert result.final is not None and np.isfinite(result.final.total)
    assert (result.checkpoint / "model.fsrn").is_file()
    assert (tmp_path / "run" / "checkpoints" / "step_000002" / "checkpoint.json").is_file()
    rows = read_rows(result.curve)
    assert [int(r["step"]) for r in rows] == [1, 2, 3]
    assert result.curve.name == CURVE_NAME


def test_parameters_move(experiment, dataset, tmp_path):
    model = FewShotRirModel(experiment.model, seed=0)
    before = model.state_dict()
    Trainer(model, dataset, experiment, tmp_path / "run").train()
    after = model.state_dict()
    assert any(not np.array_equal(before[k], after[k]) for k in before)


def test_resume_matches_uninterrupted_run(experiment, dataset, tmp_path):
    full = FewShotRirModel(experiment.model, seed=0)
    Trainer(full, dataset, experiment, tmp_path / "full").train()

    ckpt = load_checkpoint(tmp_path / "full" / "checkpoints" / "step_000002")
    assert ckpt.step == 2
    Trainer(ckpt.model, dataset, experiment, tmp_path / "resumed", resume=ckpt).train()

    expected = full.state_dict()
    for name, value in ckpt.model.state_dict().items():
        np.testing.assert_allclose(value, expected[name], rtol=0, atol=1e-12)


def test_no_ld_ablation_zeroes_decay_weight(experiment, dataset, tmp_path):
    experiment.train.ablation = "no_ld"
    assert effective_loss_config(experiment).lambda_d == 0.0
    model = FewShotRirModel(experiment.model, seed=0)
    result = Trainer(model, dataset, experiment, tmp_path / "run").train()
    assert result.final.total == pytest.approx(result.final.l1)
    assert result.final.l_d > 0


def test_incompatible_model_is_rejected(experiment, dataset, tmp_path):
    cfg = replace(experiment.model, n_rays=16)
    with pytest.raises(ConfigurationError):
        Trainer(FewShotRirModel(cfg, seed=0), dataset, experiment, tmp_path / "run")


def test_failed_update_saves_last_good(experiment, dataset, tmp_path, monkeypatch):
    model = FewShotRirModel(experiment.model, seed=0)
    trainer = Trainer(model, dataset, experiment, tmp_path / "run")
    before = model.state_dict()

    def boom():
        raise OptimizerError("non-finite gradient in 'head.0.weight' at step 1")

    monkeypatch.setattr(trainer.optimizer, "step", boom)
    with pytest.raises(TrainingAborted) as info:
        trainer.train()
    assert info.value.checkpoint == tmp_path / "run" / "checkpoints" / "last_good"
    saved = load_checkpoint(info.value.checkpoint)
    assert saved.step == 0
    for name, value in saved.model.state_dict().items():
        np.testing.assert_array_equal(value, before[name])


def test_training_loss_strictly_decreases(experiment, dataset, tmp_path):
    experiment.train = replace(experiment.train, steps=100, lr=3e-4, log_every=50, checkpoint_every=1000)
    trainer = Trainer(FewShotRirModel(experiment.model, seed=0), dataset, experiment, tmp_path / "run")
    # every step draws both seen contexts and all three of their training queries
    assert len(trainer.items) == experiment.train.batch_size
    assert all(len(queries) == experiment.train.queries_per_context for _, queries in trainer.items)
    result = trainer.train()
    totals = [float(r["total"]) for r in read_rows(result.curve)]
    assert len(totals) == 100
    assert all(later < earlier for earlier, later in zip(totals, totals[1:]))
