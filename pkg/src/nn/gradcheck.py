"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import Graph, Tensor

logger = logging.getLogger(__name__)

_ABS_FLOOR = 1e-5


@dataclass(frozen=True)
class GradCheckEntry:
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric), _ABS_FLOOR)
        return abs(self.analytic - self.numeric) / scale


@dataclass(frozen=True)
class GradCheckReport:
    tolerance: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((e.rel_error for e in self.entries), default=0.0)

    @property
    def worst(self) -> GradCheckEntry | None:
        return max(self.entries, key=lambda e: e.rel_error, default=None)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_dict(self) -> dict:
        worst = self.worst
        return {
            "tolerance": self.tolerance,
            "checked": len(self.entries),
            "max_rel_error": self.max_rel_error,
            "worst_param": worst.param if worst else None,
            "passed": self.passed,
        }


def _sample_indices(shape: tuple[int, ...], n: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(n, size), replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, shape)) for f in sorted(flat)]


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: list[tuple[str, Tensor]],
    tolerance: float = 1e-4,
    n_samples: int = 8,
    rng: np.random.Generator | None = None,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare backprop gradients with central differences on a random subsample.

    ``loss_fn`` must rebuild the scalar loss from the current parameter values
    and be deterministic (models in eval mode).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for _, p in params:
        p.zero_grad()
    with Graph() as graph:
        loss = loss_fn()
    graph.backward(loss)
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for name, p in params}

    entries = []
    for name, p in params:
        for index in _sample_indices(p.shape, n_samples, rng):
            original = p.data[index]
            p.data[index] = original + h
            up = float(loss_fn().data)
            p.data[index] = original - h
            down = float(loss_fn().data)
            p.data[index] = original
            entries.append(GradCheckEntry(name, index, float(analytic[name][index]), (up - down) / (2.0 * h)))
    report = GradCheckReport(tolerance, entries)
    logger.info("Gradient check: %d entries, max rel error %.3g", len(entries), report.max_rel_error)
    return report


def check_array_gradient(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    n_samples: int = 16,
    rng: np.random.Generator | None = None,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    name: str = "x",
) -> GradCheckReport:
    """Same check for a plain numpy function with a known gradient."""
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.array(x, dtype=np.float64)
    entries = []
    for index in _sample_indices(x.shape, n_samples, rng):
        original = x[index]
        x[index] = original + h
        up = fn(x)
        x[index] = original - h
        down = fn(x)
        x[index] = original
        entries.append(GradCheckEntry(name, index, float(analytic[index]), (up - down) / (2.0 * h)))
    return GradCheckReport(tolerance, entries)
