from __future__ import annotations

from pathlib import Path


class RirToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(RirToolkitError, ValueError):
    pass


class InfeasibleError(RirToolkitError, ValueError):
    pass


class ShapeError(RirToolkitError, ValueError):
    pass


class DomainError(RirToolkitError, ValueError):
    pass


class DegenerateInputError(RirToolkitError, ValueError):
    pass


class InsufficientDecayError(RirToolkitError, ValueError):
    """The decay curve never reaches the level the estimator needs."""

    def __init__(self, message: str, side: str = "") -> None:
        super().__init__(f"{side}: {message}" if side else message)
        self.side = side


class LocalizationError(RirToolkitError, RuntimeError):
    pass


class OptimizerError(RirToolkitError, RuntimeError):
    pass


class TrainingAborted(OptimizerError):
    def __init__(self, message: str, checkpoint: Path | None = None) -> None:
        super().__init__(message)
        self.checkpoint = checkpoint


class DatasetError(RirToolkitError, OSError):
    def __init__(self, message: str, path: Path | str | None = None) -> None:
        super().__init__(f"{message} ({path})" if path is not None else message)
        self.path = Path(path) if path is not None else None


class GraphStateError(RirToolkitError, RuntimeError):
    pass


class PreconditionError(RirToolkitError, ValueError):
    pass


class ParameterError(RirToolkitError, ValueError):
    pass


class ConfigMismatchError(RirToolkitError, ValueError):
    def __init__(self, message: str, differences: list[str]) -> None:
        super().__init__(message + ": " + "; ".join(differences))
        self.differences = differences


class RunLockedError(RirToolkitError, RuntimeError):
    pass
