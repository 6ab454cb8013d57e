import csv
import json
import os
import shutil

import pytest

from main import main
from src.app import LOG_NAME
from src.commands.registry import EXIT_OK, EXIT_TOOLKIT_ERROR
from src.evaluation.report import ROW_FIELDS
from src.learning.checkpoint import checkpoint_hash
from src.services.run_lock import LOCK_NAME


@pytest.fixture
def generated(tmp_path, experiment_file):
    out = tmp_path / "data"
    assert main(["--config", str(experiment_file), "generate", "--out", str(out)]) == EXIT_OK
    return out


def test_generate_writes_dataset_and_log(generated):
    assert (generated / "manifest.json").is_file()
    assert any((generated / "cache").iterdir())
    assert "generate" in (generated / LOG_NAME).read_text(encoding="utf-8")
    assert not (generated / LOCK_NAME).exists()


def test_generate_with_noise(tmp_path, experiment_file):
    out = tmp_path / "noisy"
    argv = ["--config", str(experiment_file), "generate", "--out", str(out), "--with-ambient-noise", "--noise-kind", "pink"]
    assert main(argv) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["noise"]["enabled"] is True
    assert manifest["config"]["noise"]["kind"] == "pink"


def test_train_then_evaluate(generated, tmp_path, experiment_file, capsys):
    run = tmp_path / "run"
    cfg = ["--config", str(experiment_file)]
    assert main([*cfg, "train", "--dataset", str(generated), "--run-dir", str(run), "--steps", "2"]) == EXIT_OK
    assert (run / "checkpoint" / "model.fsrn").is_file()

    out = tmp_path / "eval"
    argv = [*cfg, "eval", "--dataset", str(generated), "--out", str(out), "--checkpoint", str(run / "checkpoint")]
    assert main([*argv, "--no-localize"]) == EXIT_OK
    with (out / "fewshot.csv").open(encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert tuple(rows[0]) == ROW_FIELDS
    assert {r["split"] for r in rows} == {"seen", "unseen"}
    summary = json.loads((out / "fewshot.json").read_text(encoding="utf-8"))
    assert summary["metadata"]["step"] == 2
    assert "Evaluated fewshot" in capsys.readouterr().out

    sweep = tmp_path / "sweep"
    argv = [*cfg, "sweep-context", "--dataset", str(generated), "--run-dir", str(sweep), "--sizes", "1", "4"]
    assert main([*argv, "--checkpoint", str(run / "checkpoint")]) == EXIT_OK
    with (sweep / "context_sweep.csv").open(encoding="utf-8", newline="") as handle:
        assert {int(r["context_size"]) for r in csv.DictReader(handle)} == {1, 4}


def test_resume_needs_matching_ablation(generated, tmp_path, experiment_file):
    run = tmp_path / "run"
    cfg = ["--config", str(experiment_file)]
    assert main([*cfg, "train", "--dataset", str(generated), "--run-dir", str(run), "--steps", "2"]) == EXIT_OK
    argv = [*cfg, "train", "--dataset", str(generated), "--run-dir", str(tmp_path / "more"), "--no-ld"]
    assert main([*argv, "--resume", str(run / "checkpoint")]) == EXIT_TOOLKIT_ERROR


def test_baseline_evaluation_and_error_map(generated, tmp_path, experiment_file):
    cfg = ["--config", str(experiment_file)]
    out = tmp_path / "eval"
    argv = [*cfg, "eval", "--dataset", str(generated), "--out", str(out), "--baseline", "analytical_rir"]
    assert main([*argv, "--no-localize"]) == EXIT_OK
    assert (out / "analytical_rir_oracle.json").is_file()

    maps = tmp_path / "maps"
    argv = [*cfg, "error-map", "--dataset", str(generated), "--out", str(maps), "--baseline", "nearest_neighbor"]
    assert main([*argv, "--step", "1.0"]) == EXIT_OK
    written = list(maps.glob("error_map_nearest_neighbor_*.json"))
    assert len(written) == 1
    assert json.loads(written[0].read_text(encoding="utf-8"))["n_points"] > 0


def test_gradcheck_command(tmp_path):
    out = tmp_path / "gc"
    assert main(["gradcheck", "--out", str(out), "--instances", "2", "--model-instances", "1"]) == EXIT_OK
    report = json.loads((out / "gradcheck.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == ["l1", "energy_decay", "total", "model"]


def test_missing_dataset_exits_with_toolkit_error(tmp_path):
    argv = ["eval", "--dataset", str(tmp_path / "nowhere"), "--out", str(tmp_path / "out"), "--ground-truth"]
    assert main(argv) == EXIT_TOOLKIT_ERROR


def test_locked_run_dir_is_refused(tmp_path):
    out = tmp_path / "gc"
    out.mkdir()
    (out / LOCK_NAME).write_text(str(os.getppid()), encoding="utf-8")
    assert main(["gradcheck", "--out", str(out), "--instances", "1", "--model-instances", "1"]) == EXIT_TOOLKIT_ERROR
    assert not (out / "gradcheck.json").exists()


@pytest.mark.slow
def test_sweep_trains_one_model_per_size(generated, tmp_path, experiment_file):
    sweep = tmp_path / "sweep"
    argv = ["--config", str(experiment_file), "sweep-context", "--dataset", str(generated), "--run-dir", str(sweep)]
    assert main([*argv, "--sizes", "1", "4", "--seeds", "0"]) == EXIT_OK
    assert (sweep / "n01_seed0" / "checkpoint").is_dir()
    assert (sweep / "n04_seed0" / "checkpoint").is_dir()
    assert "trend_holds" in json.loads((sweep / "context_sweep.json").read_text(encoding="utf-8"))


def test_rerun_is_byte_identical(tmp_path, experiment_file):
    cfg = ["--config", str(experiment_file)]
    data, run, out = tmp_path / "data", tmp_path / "run", tmp_path / "eval"

    def pipeline():
        assert main([*cfg, "generate", "--out", str(data)]) == EXIT_OK
        assert main([*cfg, "train", "--dataset", str(data), "--run-dir", str(run), "--steps", "3"]) == EXIT_OK
        argv = [*cfg, "eval", "--dataset", str(data), "--out", str(out), "--checkpoint", str(run / "checkpoint")]
        assert main(argv) == EXIT_OK
        snapshot = {
            "manifest": (data / "manifest.json").read_bytes(),
            "checkpoint": checkpoint_hash(run / "checkpoint"),
            "curve": (run / "loss_curve.csv").read_bytes(),
            "rows": (out / "fewshot.csv").read_bytes(),
            "summary": (out / "fewshot.json").read_bytes(),
        }
        for directory in (data, run, out):
            shutil.rmtree(directory)
        return snapshot

    first = pipeline()
    second = pipeline()
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name
