"""Parameterised building blocks for the few-shot predictor."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from src.errors import ShapeError

from . import tensor as T
from .tensor import Tensor


class Module:
    """Base class: parameters and sub-modules are discovered from attributes in assignment order."""

    training: bool = False

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> Module:
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def to(self, dtype: np.dtype | str) -> Module:
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ShapeError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"parameter '{name}' expects {p.shape}, got {value.shape}")
            p.data = value.astype(p.data.dtype)


def _param(data: np.ndarray, name: str, dtype) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True, name=name)


class Linear(Module):
    def __init__(
        self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True, dtype="float32",
        name: str = "linear",
    ) -> None:
        self.name = name
        bound = 1.0 / math.sqrt(in_features)
        self.weight = _param(rng.uniform(-bound, bound, (in_features, out_features)), f"{name}.weight", dtype)
        self.bias = _param(np.zeros(out_features), f"{name}.bias", dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ShapeError(f"{self.name}: expects {self.weight.shape[0]} input features, got {x.shape}")
        y = T.matmul(x, self.weight, name=f"{self.name}/matmul")
        return T.add(y, self.bias, name=f"{self.name}/bias") if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, features: int, dtype="float32", eps: float = 1e-5, name: str = "norm") -> None:
        self.name = name
        self.eps = eps
        self.gamma = _param(np.ones(features), f"{name}.gamma", dtype)
        self.beta = _param(np.zeros(features), f"{name}.beta", dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps, name=self.name)


class Embedding(Module):
    def __init__(self, n: int, dim: int, rng: np.random.Generator, dtype="float32", name: str = "embedding") -> None:
        self.name = name
        self.table = _param(rng.normal(0.0, 1.0, (n, dim)), f"{name}.table", dtype)

    def __call__(self, indices) -> Tensor:
        return T.embedding(self.table, indices, name=self.name)


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims: list[int], rng: np.random.Generator, dtype="float32", name: str = "mlp") -> None:
        if len(dims) < 2:
            raise ShapeError(f"{name}: an MLP needs at least input and output sizes")
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, dtype=dtype, name=f"{name}.{i}") for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x


class MultiHeadAttention(Module):
    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator, dtype="float32", name: str = "attn"):
        if d_model % n_heads:
            raise ShapeError(f"{name}: d_model {d_model} is not divisible by {n_heads} heads")
        self.name = name
        self.n_heads = n_heads
        self.w_q = Linear(d_model, d_model, rng, dtype=dtype, name=f"{name}.q")
        self.w_k = Linear(d_model, d_model, rng, dtype=dtype, name=f"{name}.k")
        self.w_v = Linear(d_model, d_model, rng, dtype=dtype, name=f"{name}.v")
        self.w_o = Linear(d_model, d_model, rng, dtype=dtype, name=f"{name}.o")

    def _split(self, x: Tensor) -> Tensor:
        *batch, length, d = x.shape
        heads = T.reshape(x, (*batch, length, self.n_heads, d // self.n_heads), name=f"{self.name}/split")
        axes = list(range(len(batch))) + [len(batch) + 1, len(batch), len(batch) + 2]
        return T.transpose(heads, axes, name=f"{self.name}/heads")

    def __call__(self, query: Tensor, memory: Tensor) -> Tensor:
        """query (..., Lq, d) attends over memory (..., Lk, d); batch dims broadcast."""
        q = self._split(self.w_q(query))
        k = self._split(self.w_k(memory))
        v = self._split(self.w_v(memory))
        scale = 1.0 / math.sqrt(q.shape[-1])
        k_t = T.transpose(k, list(range(k.ndim - 2)) + [k.ndim - 1, k.ndim - 2], name=f"{self.name}/kT")
        scores = T.mul(T.matmul(q, k_t, name=f"{self.name}/scores"), scale, name=f"{self.name}/scale")
        weights = T.softmax(scores, name=f"{self.name}/softmax")
        context = T.matmul(weights, v, name=f"{self.name}/mix")
        nb = context.ndim - 3
        merged = T.transpose(context, list(range(nb)) + [nb + 1, nb, nb + 2], name=f"{self.name}/merge")
        *batch, length, heads, dh = merged.shape
        return self.w_o(T.reshape(merged, (*batch, length, heads * dh), name=f"{self.name}/concat"))


class FeedForward(Module):
    def __init__(self, d_model: int, hidden: int, rng: np.random.Generator, dtype="float32", name: str = "ffn"):
        self.up = Linear(d_model, hidden, rng, dtype=dtype, name=f"{name}.up")
        self.down = Linear(hidden, d_model, rng, dtype=dtype, name=f"{name}.down")

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(T.relu(self.up(x)))


class EncoderLayer(Module):
    """Pre-norm self-attention block."""

    def __init__(self, d_model, n_heads, hidden, dropout, rng, dtype="float32", name="enc"):
        self.name = name
        self.p = dropout
        self.norm1 = LayerNorm(d_model, dtype, name=f"{name}.norm1")
        self.attn = MultiHeadAttention(d_model, n_heads, rng, dtype, name=f"{name}.self")
        self.norm2 = LayerNorm(d_model, dtype, name=f"{name}.norm2")
        self.ffn = FeedForward(d_model, hidden, rng, dtype, name=f"{name}.ffn")

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        h = self.norm1(x)
        x = T.add(x, T.dropout(self.attn(h, h), self.p, rng, self.training), name=f"{self.name}/res1")
        h = self.norm2(x)
        return T.add(x, T.dropout(self.ffn(h), self.p, rng, self.training), name=f"{self.name}/res2")


class DecoderLayer(Module):
    """Pre-norm block: self-attention over the target tokens, then cross-attention over memory."""

    def __init__(self, d_model, n_heads, hidden, dropout, rng, dtype="float32", name="dec"):
        self.name = name
        self.p = dropout
        self.norm1 = LayerNorm(d_model, dtype, name=f"{name}.norm1")
        self.self_attn = MultiHeadAttention(d_model, n_heads, rng, dtype, name=f"{name}.self")
        self.norm2 = LayerNorm(d_model, dtype, name=f"{name}.norm2")
        self.cross_attn = MultiHeadAttention(d_model, n_heads, rng, dtype, name=f"{name}.cross")
        self.norm3 = LayerNorm(d_model, dtype, name=f"{name}.norm3")
        self.ffn = FeedForward(d_model, hidden, rng, dtype, name=f"{name}.ffn")

    def __call__(self, x: Tensor, memory: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        h = self.norm1(x)
        x = T.add(x, T.dropout(self.self_attn(h, h), self.p, rng, self.training), name=f"{self.name}/res1")
        h = self.norm2(x)
        x = T.add(x, T.dropout(self.cross_attn(h, memory), self.p, rng, self.training), name=f"{self.name}/res2")
        h = self.norm3(x)
        return T.add(x, T.dropout(self.ffn(h), self.p, rng, self.training), name=f"{self.name}/res3")
