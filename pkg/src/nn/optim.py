from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import OptimizerError, ShapeError

from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


class Adam:
    """Bias-corrected Adam over named parameters."""

    def __init__(
        self,
        params: list[tuple[str, Tensor]],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-5,
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()
        for name, p in self.params:
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def _gradients(self) -> dict[str, np.ndarray]:
        grads = {}
        for name, p in self.params:
            g = np.zeros_like(p.data) if p.grad is None else p.grad
            if g.shape != p.shape:
                raise ShapeError(f"gradient for '{name}' has shape {g.shape}, parameter is {p.shape}")
            if not np.all(np.isfinite(g)):
                raise OptimizerError(f"non-finite gradient in '{name}' at step {self.state.step + 1}")
            grads[name] = g
        return grads

    def step(self) -> None:
        # Every gradient is checked before any parameter moves.
        grads = self._gradients()
        self.state.step += 1
        t = self.state.step
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, p in self.params:
            g = grads[name]
            m = self.state.m[name]
            v = self.state.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data = (p.data - update).astype(p.data.dtype)

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"step": np.asarray([self.state.step], dtype=np.float64)}
        for name in self.state.m:
            out[f"m/{name}"] = self.state.m[name]
            out[f"v/{name}"] = self.state.v[name]
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.state.step = int(np.asarray(state["step"]).ravel()[0])
        for name, p in self.params:
            for key, bucket in (("m", self.state.m), ("v", self.state.v)):
                value = np.asarray(state[f"{key}/{name}"])
                if value.shape != p.shape:
                    raise ShapeError(f"optimizer state '{key}/{name}' expects {p.shape}, got {value.shape}")
                bucket[name] = value.astype(p.data.dtype)
        logger.debug("Restored Adam state at step %d", self.state.step)
