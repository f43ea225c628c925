import json
import zlib
from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Tuple

from src.models.errors import ConfigError

LAMBDA_SET: Tuple[float, ...] = (0.0025, 0.0035, 0.0067, 0.013, 0.025, 0.05)

CHANNEL_HEAD_LAYOUTS = ("channels", "tokens")

# Fields that change the coded representation; the config hash covers exactly these.
ARCHITECTURE_FIELDS = (
    "N",
    "M",
    "z_channels",
    "sch_stack",
    "window_size",
    "heads",
    "mlp_ratio",
    "slice_count",
    "predictor_channels",
    "wavelet_scale",
    "use_wavelet",
    "channel_attention",
    "channel_head_layout",
    "channel_logit_scale",
    "symbol_bound",
)


@dataclass
class ModelConfig:
    """Architecture hyperparameters of the space-channel hybrid codec."""

    N: int = 256
    M: int = 320
    z_channels: int = 192
    sch_stack: Tuple[int, ...] = (2, 4, 2)
    window_size: int = 8
    heads: int = 8
    mlp_ratio: float = 2.0
    slice_count: int = 5
    predictor_channels: int = 224
    lmbda: float = 0.013

    # Haar filters are scaled by this factor; 0.5 is orthonormal, 1.0 the raw +-1 filters
    wavelet_scale: float = 0.5
    use_wavelet: bool = True
    channel_attention: bool = True
    channel_head_layout: str = "channels"
    channel_logit_scale: Optional[float] = None

    symbol_bound: int = 255

    @classmethod
    def toy(cls) -> "ModelConfig":
        """Small configuration for desk-scale training runs."""
        return cls(
            N=32, M=48, z_channels=24, sch_stack=(1, 1, 1), window_size=4, heads=4, slice_count=4, predictor_channels=64
        )

    @classmethod
    def tiny(cls) -> "ModelConfig":
        """Smallest configuration that exercises every code path; used by unit tests."""
        return cls(
            N=8, M=8, z_channels=4, sch_stack=(1, 1, 1), window_size=2, heads=2, slice_count=2, predictor_channels=8
        )

    @property
    def slice_channels(self) -> int:
        return self.M // self.slice_count

    @property
    def lambda_index(self) -> int:
        """Position of lmbda in LAMBDA_SET."""
        for index, value in enumerate(LAMBDA_SET):
            if abs(value - self.lmbda) < 1e-9:
                return index
        raise ConfigError(f"lmbda={self.lmbda} is not one of {LAMBDA_SET}")

    def validate(self) -> "ModelConfig":
        """Check invariants between fields.

        Returns:
            self, for chaining.

        Raises:
            ConfigError: if any invariant is violated.
        """
        if self.N <= 0 or self.N % 2:
            raise ConfigError(f"N must be a positive even number, got {self.N}")
        if self.M <= 0 or self.M % 2:
            raise ConfigError(f"M must be a positive even number, got {self.M}")
        if self.slice_count <= 0 or self.M % self.slice_count:
            raise ConfigError(f"M={self.M} is not divisible by slice_count={self.slice_count}")
        if self.window_size < 2:
            raise ConfigError(f"window_size must be at least 2, got {self.window_size}")
        if len(self.sch_stack) != 3 or any(k < 0 for k in self.sch_stack):
            raise ConfigError(f"sch_stack needs three non-negative block counts, got {self.sch_stack}")
        for width in (self.N, self.M):
            if (width // 2) % self.heads:
                raise ConfigError(f"attention width {width // 2} is not divisible by heads={self.heads}")
        if self.channel_head_layout not in CHANNEL_HEAD_LAYOUTS:
            raise ConfigError(f"channel_head_layout must be one of {CHANNEL_HEAD_LAYOUTS}")
        if self.channel_head_layout == "tokens" and (self.window_size**2) % self.heads:
            raise ConfigError(f"window_size**2={self.window_size ** 2} is not divisible by heads={self.heads}")
        if self.wavelet_scale <= 0:
            raise ConfigError(f"wavelet_scale must be positive, got {self.wavelet_scale}")
        if not 1 <= self.symbol_bound <= 32767:
            raise ConfigError(f"symbol_bound out of range: {self.symbol_bound}")
        _ = self.lambda_index
        return self

    def architecture(self) -> Dict:
        values = asdict(self)
        return {name: values[name] for name in ARCHITECTURE_FIELDS}

    def config_hash(self) -> int:
        """CRC-32 of the canonical architecture description."""
        canonical = json.dumps(self.architecture(), sort_keys=True, separators=(",", ":"))
        return zlib.crc32(canonical.encode("utf-8")) & 0xFFFFFFFF


@dataclass
class TrainConfig:
    """Optimization settings for one rate-distortion training run."""

    batch_size: int = 8
    learning_rate: float = 1e-4
    plateau_patience: int = 5
    plateau_factor: float = 0.3
    min_learning_rate: float = 1e-7
    crop_size: int = 256
    max_steps: int = 5000
    eval_period: int = 500
    log_period: int = 50
    clip_max_norm: float = 1.0
    num_workers: int = 0
    seed: int = 0
    extensions: Tuple[str, ...] = (".png", ".jpg", ".jpeg")

    def validate(self) -> "TrainConfig":
        if self.crop_size <= 0 or self.crop_size % 64:
            raise ConfigError(f"crop_size must be a positive multiple of 64, got {self.crop_size}")
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if not 0 < self.plateau_factor < 1:
            raise ConfigError(f"plateau_factor must be in (0, 1), got {self.plateau_factor}")
        if self.learning_rate <= 0 or self.min_learning_rate < 0:
            raise ConfigError("learning rates must be positive")
        if self.max_steps < 0 or self.eval_period <= 0 or self.log_period <= 0:
            raise ConfigError("max_steps, eval_period and log_period must be positive")
        return self


def config_keys() -> Dict[str, type]:
    """All accepted config-file keys mapped to the dataclass that owns them."""
    keys = {f.name: ModelConfig for f in fields(ModelConfig)}
    keys.update({f.name: TrainConfig for f in fields(TrainConfig)})
    return keys


def _from_dict(cls, values: Dict):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return cls(**converted)


def model_config_from_dict(values: Dict) -> ModelConfig:
    return _from_dict(ModelConfig, values).validate()


def train_config_from_dict(values: Dict) -> TrainConfig:
    return _from_dict(TrainConfig, values).validate()
