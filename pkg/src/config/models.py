from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from src.errors import ConfigurationError
from src.version import APP_VERSION

ABLATIONS = ("none", "no_echo", "no_vision", "no_ld")
ECHO_ACQUISITIONS = ("direct", "sweep")
NOISE_KINDS = ("white", "burst", "pink")
HEAD_KINDS = ("spectrogram", "acoustic_params")


def _pair(value: Any, default: tuple[float, float]) -> tuple[float, float]:
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return (float(value), float(value))
    lo, hi = value
    return (float(lo), float(hi))


def _check_range(name: str, bounds: tuple[float, float]) -> None:
    lo, hi = bounds
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigurationError(f"{name}: bounds must be finite, got {bounds}")
    if lo > hi:
        raise ConfigurationError(f"{name}: min {lo} exceeds max {hi}")


@dataclass
class RoomGenConfig:
    width_range: tuple[float, float] = (3.0, 8.0)
    depth_range: tuple[float, float] = (3.0, 7.0)
    height_range: tuple[float, float] = (2.5, 3.5)
    absorption_range: tuple[float, float] = (0.2, 0.8)
    agent_height: float = 1.5

    def validate(self) -> None:
        for name in ("width_range", "depth_range", "height_range", "absorption_range"):
            _check_range(name, getattr(self, name))
        for name in ("width_range", "depth_range", "height_range"):
            if getattr(self, name)[0] <= 0:
                raise ConfigurationError(f"{name}: dimensions must be positive")
        lo, hi = self.absorption_range
        if lo <= 0 or hi > 1:
            raise ConfigurationError(f"absorption_range must lie in (0, 1], got {self.absorption_range}")
        if not 0 < self.agent_height < self.height_range[0]:
            raise ConfigurationError(
                f"agent_height {self.agent_height} must be below the lowest ceiling {self.height_range[0]}"
            )

    def to_dict(self) -> dict:
        return {
            "width_range": list(self.width_range),
            "depth_range": list(self.depth_range),
            "height_range": list(self.height_range),
            "absorption_range": list(self.absorption_range),
            "agent_height": self.agent_height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RoomGenConfig:
        return cls(
            width_range=_pair(data.get("width_range"), (3.0, 8.0)),
            depth_range=_pair(data.get("depth_range"), (3.0, 7.0)),
            height_range=_pair(data.get("height_range"), (2.5, 3.5)),
            absorption_range=_pair(data.get("absorption_range"), (0.2, 0.8)),
            agent_height=float(data.get("agent_height", 1.5)),
        )


@dataclass
class SimConfig:
    sample_rate: int = 16000
    max_reflection_order: int = 20
    speed_of_sound: float = 343.0
    rir_length: float = 0.5  # seconds
    ear_baseline: float = 0.18
    ear_directivity_exponent: float = 1.0
    min_distance: float = 0.1
    fractional_delay_taps: int = 81

    @property
    def rir_samples(self) -> int:
        return int(round(self.rir_length * self.sample_rate))

    def validate(self) -> None:
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if self.max_reflection_order < 0:
            raise ConfigurationError("max_reflection_order must be >= 0")
        if self.speed_of_sound <= 0 or self.rir_length <= 0:
            raise ConfigurationError("speed_of_sound and rir_length must be positive")
        if self.ear_baseline < 0 or self.ear_directivity_exponent < 0:
            raise ConfigurationError("ear_baseline and ear_directivity_exponent must be >= 0")
        if self.min_distance <= 0:
            raise ConfigurationError("min_distance must be positive")
        if self.fractional_delay_taps < 3 or self.fractional_delay_taps % 2 == 0:
            raise ConfigurationError("fractional_delay_taps must be odd and >= 3")

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "max_reflection_order": self.max_reflection_order,
            "speed_of_sound": self.speed_of_sound,
            "rir_length": self.rir_length,
            "ear_baseline": self.ear_baseline,
            "ear_directivity_exponent": self.ear_directivity_exponent,
            "min_distance": self.min_distance,
            "fractional_delay_taps": self.fractional_delay_taps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        return cls(
            sample_rate=int(data.get("sample_rate", 16000)),
            max_reflection_order=int(data.get("max_reflection_order", 20)),
            speed_of_sound=float(data.get("speed_of_sound", 343.0)),
            rir_length=float(data.get("rir_length", 0.5)),
            ear_baseline=float(data.get("ear_baseline", 0.18)),
            ear_directivity_exponent=float(data.get("ear_directivity_exponent", 1.0)),
            min_distance=float(data.get("min_distance", 0.1)),
            fractional_delay_taps=int(data.get("fractional_delay_taps", 81)),
        )


@dataclass
class SweepConfig:
    f_start: float = 20.0
    f_end: float = 7200.0
    duration: float = 1.0
    amplitude: float = 0.8

    def validate(self, sample_rate: int) -> None:
        if not 0 < self.f_start < self.f_end:
            raise ConfigurationError(f"sweep band must satisfy 0 < f_start < f_end, got {self.f_start}..{self.f_end}")
        if self.f_end > sample_rate / 2:
            raise ConfigurationError(f"sweep f_end {self.f_end} Hz exceeds Nyquist {sample_rate / 2} Hz")
        if self.duration <= 0 or self.amplitude <= 0:
            raise ConfigurationError("sweep duration and amplitude must be positive")

    def to_dict(self) -> dict:
        return {
            "f_start": self.f_start,
            "f_end": self.f_end,
            "duration": self.duration,
            "amplitude": self.amplitude,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SweepConfig:
        return cls(
            f_start=float(data.get("f_start", 20.0)),
            f_end=float(data.get("f_end", 7200.0)),
            duration=float(data.get("duration", 1.0)),
            amplitude=float(data.get("amplitude", 0.8)),
        )


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = 16000
    win_len_ms: float = 15.5
    hop_ms: float = 3.875
    fft_size: int = 511
    window: str = "hann"

    @property
    def win_length(self) -> int:
        return int(round(self.win_len_ms * self.sample_rate / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def n_freqs(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def frame_rate(self) -> float:
        """Frames per second."""
        return self.sample_rate / self.hop_length

    def n_frames(self, n_samples: int) -> int:
        # Centered framing: fft_size // 2 zeros on both sides.
        pad = self.fft_size // 2
        return 1 + (n_samples + 2 * pad - self.fft_size) // self.hop_length

    def validate(self) -> None:
        if self.window != "hann":
            raise ConfigurationError(f"unsupported window: {self.window}")
        if self.hop_length <= 0 or self.hop_length >= self.win_length:
            raise ConfigurationError(
                f"hop ({self.hop_length} samples) must be positive and shorter than the window ({self.win_length})"
            )
        if self.fft_size < self.win_length:
            raise ConfigurationError(
                f"fft_size {self.fft_size} is shorter than the window ({self.win_length} samples)"
            )

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "win_len_ms": self.win_len_ms,
            "hop_ms": self.hop_ms,
            "fft_size": self.fft_size,
            "window": self.window,
        }

    @classmethod
    def from_dict(cls, data: dict) -> StftConfig:
        return cls(
            sample_rate=int(data.get("sample_rate", 16000)),
            win_len_ms=float(data.get("win_len_ms", 15.5)),
            hop_ms=float(data.get("hop_ms", 3.875)),
            fft_size=int(data.get("fft_size", 511)),
            window=data.get("window", "hann"),
        )


@dataclass
class NoiseConfig:
    enabled: bool = False
    kind: str = "white"
    snr_db: float = 20.0

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "kind": self.kind, "snr_db": self.snr_db}

    @classmethod
    def from_dict(cls, data: dict) -> NoiseConfig:
        kind = data.get("kind", "white")
        return cls(
            enabled=bool(data.get("enabled", False)),
            kind=kind if kind in NOISE_KINDS else "white",
            snr_db=float(data.get("snr_db", 20.0)),
        )


@dataclass
class DatasetConfig:
    n_seen_rooms: int = 6
    n_unseen_rooms: int = 2
    contexts_per_room: int = 4
    queries_per_context: int = 50
    observations_per_context: int = 20
    test_fraction: float = 0.2
    n_rays: int = 32
    fov_deg: float = 90.0
    min_wall_clearance: float = 0.3
    echo_acquisition: str = "direct"
    workers: int = 0  # 0 = one per core

    def validate(self) -> None:
        counts = (self.n_seen_rooms, self.contexts_per_room, self.queries_per_context, self.observations_per_context)
        if min(counts) < 1 or self.n_unseen_rooms < 0:
            raise ConfigurationError("dataset counts must be >= 1 (unseen rooms >= 0)")
        if not 0 <= self.test_fraction < 1:
            raise ConfigurationError("test_fraction must lie in [0, 1)")
        if self.n_rays < 2 or not 0 < self.fov_deg <= 360:
            raise ConfigurationError("depth scan needs n_rays >= 2 and 0 < fov <= 360 degrees")
        if self.echo_acquisition not in ECHO_ACQUISITIONS:
            raise ConfigurationError(f"echo_acquisition must be one of {ECHO_ACQUISITIONS}")

    def to_dict(self) -> dict:
        return {
            "n_seen_rooms": self.n_seen_rooms,
            "n_unseen_rooms": self.n_unseen_rooms,
            "contexts_per_room": self.contexts_per_room,
            "queries_per_context": self.queries_per_context,
            "observations_per_context": self.observations_per_context,
            "test_fraction": self.test_fraction,
            "n_rays": self.n_rays,
            "fov_deg": self.fov_deg,
            "min_wall_clearance": self.min_wall_clearance,
            "echo_acquisition": self.echo_acquisition,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> DatasetConfig:
        return cls(
            n_seen_rooms=int(data.get("n_seen_rooms", 6)),
            n_unseen_rooms=int(data.get("n_unseen_rooms", 2)),
            contexts_per_room=int(data.get("contexts_per_room", 4)),
            queries_per_context=int(data.get("queries_per_context", 50)),
            observations_per_context=int(data.get("observations_per_context", 20)),
            test_fraction=float(data.get("test_fraction", 0.2)),
            n_rays=int(data.get("n_rays", 32)),
            fov_deg=float(data.get("fov_deg", 90.0)),
            min_wall_clearance=float(data.get("min_wall_clearance", 0.3)),
            echo_acquisition=data.get("echo_acquisition", "direct"),
            workers=max(0, int(data.get("workers", 0))),
        )


@dataclass
class ModelConfig:
    d_model: int = 128
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_heads: int = 4
    ffn_hidden: int = 256
    dropout: float = 0.1
    pe_frequencies: int = 8
    modality_dim: int = 8
    n_rays: int = 32
    depth_hidden: int = 128
    depth_dim: int = 64
    echo_bands: int = 16
    echo_time_bins: int = 8
    echo_hidden: int = 256
    echo_dim: int = 64
    head_hidden_dims: tuple[int, ...] = (256,)
    output_shape: tuple[int, int, int] = (2, 64, 64)
    head: str = "spectrogram"
    dtype: str = "float32"

    @property
    def echo_feature_dim(self) -> int:
        return self.output_shape[0] * self.echo_bands * self.echo_time_bins

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.n_enc_layers < 1 or self.n_dec_layers < 1:
            raise ConfigurationError("the transformer needs at least one encoder and one decoder layer")
        if self.head not in HEAD_KINDS:
            raise ConfigurationError(f"head must be one of {HEAD_KINDS}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError("dtype must be float32 or float64")
        _, n_freqs, n_frames = self.output_shape
        if self.echo_bands > n_freqs or self.echo_time_bins > n_frames:
            raise ConfigurationError("echo pooling grid is finer than the spectrogram")

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model,
            "n_enc_layers": self.n_enc_layers,
            "n_dec_layers": self.n_dec_layers,
            "n_heads": self.n_heads,
            "ffn_hidden": self.ffn_hidden,
            "dropout": self.dropout,
            "pe_frequencies": self.pe_frequencies,
            "modality_dim": self.modality_dim,
            "n_rays": self.n_rays,
            "depth_hidden": self.depth_hidden,
            "depth_dim": self.depth_dim,
            "echo_bands": self.echo_bands,
            "echo_time_bins": self.echo_time_bins,
            "echo_hidden": self.echo_hidden,
            "echo_dim": self.echo_dim,
            "head_hidden_dims": list(self.head_hidden_dims),
            "output_shape": list(self.output_shape),
            "head": self.head,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        head = data.get("head", "spectrogram")
        return cls(
            d_model=int(data.get("d_model", 128)),
            n_enc_layers=int(data.get("n_enc_layers", 2)),
            n_dec_layers=int(data.get("n_dec_layers", 2)),
            n_heads=int(data.get("n_heads", 4)),
            ffn_hidden=int(data.get("ffn_hidden", 256)),
            dropout=max(0.0, min(0.9, float(data.get("dropout", 0.1)))),
            pe_frequencies=int(data.get("pe_frequencies", 8)),
            modality_dim=int(data.get("modality_dim", 8)),
            n_rays=int(data.get("n_rays", 32)),
            depth_hidden=int(data.get("depth_hidden", 128)),
            depth_dim=int(data.get("depth_dim", 64)),
            echo_bands=int(data.get("echo_bands", 16)),
            echo_time_bins=int(data.get("echo_time_bins", 8)),
            echo_hidden=int(data.get("echo_hidden", 256)),
            echo_dim=int(data.get("echo_dim", 64)),
            head_hidden_dims=tuple(int(h) for h in data.get("head_hidden_dims", [256])),
            output_shape=tuple(int(s) for s in data.get("output_shape", [2, 64, 64])),
            head=head if head in HEAD_KINDS else "spectrogram",
            dtype=data.get("dtype", "float32"),
        )


@dataclass
class LossConfig:
    lambda_d: float = 1e-2
    tail_epsilon: float = 0.0
    l1_domain: str = "log"

    def validate(self) -> None:
        if self.lambda_d < 0 or self.tail_epsilon < 0:
            raise ConfigurationError("lambda_d and tail_epsilon must be >= 0")
        if self.l1_domain not in ("log", "linear"):
            raise ConfigurationError("l1_domain must be 'log' or 'linear'")

    def to_dict(self) -> dict:
        return {"lambda_d": self.lambda_d, "tail_epsilon": self.tail_epsilon, "l1_domain": self.l1_domain}

    @classmethod
    def from_dict(cls, data: dict) -> LossConfig:
        return cls(
            lambda_d=float(data.get("lambda_d", 1e-2)),
            tail_epsilon=float(data.get("tail_epsilon", 0.0)),
            l1_domain=data.get("l1_domain", "log"),
        )


@dataclass
class TrainConfig:
    steps: int = 1500
    batch_size: int = 24
    queries_per_context: int = 60
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    seed: int = 0
    log_every: int = 25
    checkpoint_every: int = 250
    ablation: str = "none"
    context_size: int = 0  # 0 = every observation in the context

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.queries_per_context < 1:
            raise ConfigurationError("steps, batch_size and queries_per_context must be >= 1")
        if self.lr <= 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or self.eps <= 0:
            raise ConfigurationError("invalid Adam hyperparameters")
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"ablation must be one of {ABLATIONS}")
        if self.context_size < 0:
            raise ConfigurationError("context_size must be >= 0")

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "batch_size": self.batch_size,
            "queries_per_context": self.queries_per_context,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "seed": self.seed,
            "log_every": self.log_every,
            "checkpoint_every": self.checkpoint_every,
            "ablation": self.ablation,
            "context_size": self.context_size,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        ablation = data.get("ablation", "none")
        return cls(
            steps=int(data.get("steps", 1500)),
            batch_size=int(data.get("batch_size", 24)),
            queries_per_context=int(data.get("queries_per_context", 60)),
            lr=float(data.get("lr", 1e-4)),
            beta1=float(data.get("beta1", 0.9)),
            beta2=float(data.get("beta2", 0.999)),
            eps=float(data.get("eps", 1e-5)),
            seed=int(data.get("seed", 0)),
            log_every=max(1, int(data.get("log_every", 25))),
            checkpoint_every=max(1, int(data.get("checkpoint_every", 250))),
            ablation=ablation if ablation in ABLATIONS else "none",
            context_size=int(data.get("context_size", 0)),
        )


@dataclass
class EvalConfig:
    direct_window_ms: float = 2.5
    interpolation_weighting: str = "inverse_distance"
    localize: bool = True
    workers: int = 0
    analytical_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "direct_window_ms": self.direct_window_ms,
            "interpolation_weighting": self.interpolation_weighting,
            "localize": self.localize,
            "workers": self.workers,
            "analytical_seed": self.analytical_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EvalConfig:
        weighting = data.get("interpolation_weighting", "inverse_distance")
        return cls(
            direct_window_ms=float(data.get("direct_window_ms", 2.5)),
            interpolation_weighting=weighting if weighting in ("inverse_distance", "uniform") else "inverse_distance",
            localize=bool(data.get("localize", True)),
            workers=max(0, int(data.get("workers", 0))),
            analytical_seed=int(data.get("analytical_seed", 0)),
        )


@dataclass
class ExperimentConfig:
    version: int = 1
    app_version: str = APP_VERSION
    seed: int = 0
    rooms: RoomGenConfig = field(default_factory=RoomGenConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.rooms.validate()
        self.sim.validate()
        self.sweep.validate(self.sim.sample_rate)
        self.stft.validate()
        self.dataset.validate()
        self.model.validate()
        self.loss.validate()
        self.train.validate()
        if self.stft.sample_rate != self.sim.sample_rate:
            raise ConfigurationError(
                f"stft sample_rate {self.stft.sample_rate} differs from sim sample_rate {self.sim.sample_rate}"
            )
        expected = (2, self.stft.n_freqs, self.stft.n_frames(self.sim.rir_samples))
        if tuple(self.model.output_shape) != expected:
            raise ConfigurationError(
                f"model output_shape {tuple(self.model.output_shape)} does not match the STFT layout {expected}"
            )
        if self.model.n_rays != self.dataset.n_rays:
            raise ConfigurationError("model.n_rays must equal dataset.n_rays")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "app_version": APP_VERSION,
            "seed": self.seed,
            "rooms": self.rooms.to_dict(),
            "sim": self.sim.to_dict(),
            "sweep": self.sweep.to_dict(),
            "stft": self.stft.to_dict(),
            "noise": self.noise.to_dict(),
            "dataset": self.dataset.to_dict(),
            "model": self.model.to_dict(),
            "loss": self.loss.to_dict(),
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        return cls(
            version=1,
            app_version=APP_VERSION,
            seed=int(data.get("seed", 0)),
            rooms=RoomGenConfig.from_dict(data.get("rooms", {})),
            sim=SimConfig.from_dict(data.get("sim", {})),
            sweep=SweepConfig.from_dict(data.get("sweep", {})),
            stft=StftConfig.from_dict(data.get("stft", {})),
            noise=NoiseConfig.from_dict(data.get("noise", {})),
            dataset=DatasetConfig.from_dict(data.get("dataset", {})),
            model=ModelConfig.from_dict(data.get("model", {})),
            loss=LossConfig.from_dict(data.get("loss", {})),
            train=TrainConfig.from_dict(data.get("train", {})),
            eval=EvalConfig.from_dict(data.get("eval", {})),
        )
