import argparse

import pytest

from src.commands.base import CommandBase, CommandContext, open_dataset, require_same
from src.commands.registry import EXIT_FAILED, EXIT_OK, EXIT_TOOLKIT_ERROR, CommandRegistry, default_registry
from src.errors import ConfigMismatchError, ConfigurationError


class Scripted(CommandBase):
    def __init__(self, name, outcome):
        self.name = name
        self.outcome = outcome

    def run_dir(self, args):
        return args.out

    def run(self, ctx):
        if isinstance(self.outcome, Exception):
            raise self.outcome
        return self.outcome


@pytest.fixture
def registry():
    registry = CommandRegistry()
    registry.register(Scripted("ok", None))
    registry.register(Scripted("bad-config", ConfigurationError("lambda_d must be >= 0")))
    registry.register(Scripted("crash", KeyError("boom")))
    return registry


@pytest.mark.parametrize(
    "name, code", [("ok", EXIT_OK), ("bad-config", EXIT_TOOLKIT_ERROR), ("crash", EXIT_FAILED), ("missing", EXIT_TOOLKIT_ERROR)]
)
def test_exit_codes(registry, tmp_path, name, code):
    ctx = CommandContext(argparse.Namespace(out=tmp_path), tmp_path)
    assert registry.execute(name, ctx) == code


def test_default_commands():
    assert default_registry().available() == ["generate", "train", "eval", "error-map", "sweep-context", "gradcheck"]


def test_subparsers_require_a_command():
    parser = argparse.ArgumentParser()
    default_registry().add_subparsers(parser)
    with pytest.raises(SystemExit):
        parser.parse_args([])
    args = parser.parse_args(["train", "--dataset", "d", "--run-dir", "r", "--no-ld", "--head", "acoustic-params"])
    assert args.no_ld and args.head == "acoustic-params"
    with pytest.raises(SystemExit):
        parser.parse_args(["train", "--dataset", "d", "--run-dir", "r", "--no-ld", "--no-echo"])


def test_seed_flag_reaches_generation_and_training(tmp_path, experiment_file):
    ctx = CommandContext(argparse.Namespace(config=experiment_file, preset=None, seed=11), tmp_path)
    cfg = ctx.config()
    assert cfg.seed == cfg.train.seed == 11
    assert ctx.config() is cfg


def test_require_same_lists_differences():
    require_same("sim config", {"a": 1}, {"a": 1})
    with pytest.raises(ConfigMismatchError) as info:
        require_same("sim config", {"a": 1, "b": {"c": 2}}, {"a": 1, "b": {"c": 3}})
    assert "b.c" in str(info.value)


def test_open_dataset_checks_sim_config(rendered_dataset, experiment):
    open_dataset(rendered_dataset, experiment)
    experiment.sim.max_reflection_order += 1
    with pytest.raises(ConfigMismatchError):
        open_dataset(rendered_dataset, experiment)
