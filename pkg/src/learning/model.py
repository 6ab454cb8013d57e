"""Few-shot RIR predictor: observation tokens, set encoder, query decoder, output head."""

from __future__ import annotations

import logging

import numpy as np

from src.config.models import ModelConfig
from src.errors import PreconditionError, ShapeError
from src.nn import tensor as T
from src.nn.layers import MLP, DecoderLayer, Embedding, EncoderLayer, LayerNorm, Linear, Module
from src.nn.tensor import Tensor

from .features import POSE_ATTRIBUTES, SOURCE_ATTRIBUTES, ContextArrays

logger = logging.getLogger(__name__)

VISION, ECHO = 0, 1
ACOUSTIC_PARAM_OUTPUTS = 4  # rt60 left/right, drr left/right


class FewShotRirModel(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0) -> None:
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        dtype = cfg.dtype
        pose_dim = 2 * cfg.pe_frequencies * POSE_ATTRIBUTES
        query_dim = 2 * cfg.pe_frequencies * (SOURCE_ATTRIBUTES + POSE_ATTRIBUTES)

        self.depth_encoder = MLP([cfg.n_rays, cfg.depth_hidden, cfg.depth_dim], rng, dtype, name="depth_encoder")
        self.echo_encoder = MLP([cfg.echo_feature_dim, cfg.echo_hidden, cfg.echo_dim], rng, dtype, name="echo_encoder")
        self.modality = Embedding(2, cfg.modality_dim, rng, dtype, name="modality")
        self.fuse_vision = Linear(
            cfg.depth_dim + pose_dim + cfg.modality_dim, cfg.d_model, rng, bias=False, dtype=dtype, name="fuse_vision"
        )
        self.fuse_echo = Linear(
            cfg.echo_dim + pose_dim + cfg.modality_dim, cfg.d_model, rng, bias=False, dtype=dtype, name="fuse_echo"
        )
        self.encoder = [
            EncoderLayer(cfg.d_model, cfg.n_heads, cfg.ffn_hidden, cfg.dropout, rng, dtype, name=f"encoder.{i}")
            for i in range(cfg.n_enc_layers)
        ]
        self.encoder_norm = LayerNorm(cfg.d_model, dtype, name="encoder_norm")
        self.query_proj = Linear(query_dim, cfg.d_model, rng, bias=False, dtype=dtype, name="query_proj")
        self.decoder = [
            DecoderLayer(cfg.d_model, cfg.n_heads, cfg.ffn_hidden, cfg.dropout, rng, dtype, name=f"decoder.{i}")
            for i in range(cfg.n_dec_layers)
        ]
        self.decoder_norm = LayerNorm(cfg.d_model, dtype, name="decoder_norm")
        out_dim = int(np.prod(cfg.output_shape)) if cfg.head == "spectrogram" else ACOUSTIC_PARAM_OUTPUTS
        self.head = MLP([cfg.d_model, *cfg.head_hidden_dims, out_dim], rng, dtype, name="head")
        logger.debug("Built %s head with %d parameters", cfg.head, self.n_parameters())

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def _const(self, array: np.ndarray) -> Tensor:
        return Tensor(np.asarray(array, dtype=self.cfg.dtype))

    def _tokens(self, features: Tensor, encoder: MLP, fuse: Linear, pose: Tensor, modality: int) -> Tensor:
        n = features.shape[0]
        embedding = encoder(features)
        tag = self.modality([modality] * n)
        return fuse(T.concat([embedding, pose, tag], axis=-1, name=f"{fuse.name}/concat"))

    def memory_tokens(self, context: ContextArrays, ablation: str = "none") -> Tensor:
        """The multimodal memory S: N vision tokens then N echo tokens, fewer under an ablation."""
        if context.size < 1:
            raise PreconditionError("a context needs at least one observation")
        if context.depth.shape[1] != self.cfg.n_rays:
            raise ShapeError(f"depth scans have {context.depth.shape[1]} rays, model expects {self.cfg.n_rays}")
        if context.echo.shape[1] != self.cfg.echo_feature_dim:
            raise ShapeError(
                f"echo features have {context.echo.shape[1]} values, model expects {self.cfg.echo_feature_dim}"
            )
        pose = self._const(context.pose)
        tokens = []
        if ablation != "no_vision":
            tokens.append(self._tokens(self._const(context.depth), self.depth_encoder, self.fuse_vision, pose, VISION))
        if ablation != "no_echo":
            tokens.append(self._tokens(self._const(context.echo), self.echo_encoder, self.fuse_echo, pose, ECHO))
        if not tokens:
            raise PreconditionError("at least one modality must stay enabled")
        return tokens[0] if len(tokens) == 1 else T.concat(tokens, axis=0, name="memory")

    def encode_context(
        self, context: ContextArrays, ablation: str = "none", rng: np.random.Generator | None = None
    ) -> Tensor:
        """Implicit representation C over the memory tokens; no order encoding, so set-equivariant."""
        x = self.memory_tokens(context, ablation)
        for layer in self.encoder:
            x = layer(x, rng)
        return self.encoder_norm(x)

    def encode_query(self, queries: np.ndarray) -> Tensor:
        return self.query_proj(self._const(queries))

    def decode(self, memory: Tensor, queries: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        """One target token per query, cross-attending over the shared memory."""
        q = self.encode_query(queries)
        n, d = q.shape
        x = T.reshape(q, (n, 1, d), name="query_tokens")
        for layer in self.decoder:
            x = layer(x, memory, rng)
        x = T.reshape(self.decoder_norm(x), (n, d), name="decoded")
        out = self.head(x)
        if self.cfg.head == "spectrogram":
            return T.reshape(out, (n, *self.cfg.output_shape), name="spectrogram")
        return out

    def __call__(
        self,
        context: ContextArrays,
        queries: np.ndarray,
        ablation: str = "none",
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        return self.decode(self.encode_context(context, ablation, rng), queries, rng)

    def predict(self, context: ContextArrays, queries: np.ndarray, ablation: str = "none") -> np.ndarray:
        """Eval-mode inference without a tape: (Q, 2, F, T) log magnitudes or (Q, 4) parameters."""
        was_training = self.training
        self.eval()
        try:
            return self(context, queries, ablation).data.astype(np.float64)
        finally:
            self.train(was_training)


def decode_acoustic_params(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Q, 4) head output -> rt60 seconds (Q, 2), drr dB (Q, 2)."""
    raw = np.asarray(raw, dtype=np.float64)
    rt60 = np.maximum(raw[:, :2], 1e-3)
    return rt60, 10.0 * raw[:, 2:]


def encode_acoustic_params(rt60: np.ndarray, drr: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(rt60, dtype=np.float64), np.asarray(drr, dtype=np.float64) / 10.0], axis=-1)


def model_summary(model: FewShotRirModel) -> str:
    cfg = model.cfg
    return (
        f"d_model={cfg.d_model} enc={cfg.n_enc_layers} dec={cfg.n_dec_layers} heads={cfg.n_heads} "
        f"head={cfg.head} params={model.n_parameters():,}"
    )
