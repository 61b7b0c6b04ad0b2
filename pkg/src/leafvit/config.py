"""Flat ``key=value`` pipeline configuration."""
import os
from dataclasses import asdict, dataclass, fields

from .cnn import ARCHITECTURES
from .errors import ConfigError
from .formats import parse_key_values
from .trainer import TrainConfig
from .vit import VARIANTS, ViTConfig


@dataclass(frozen=True)
class PipelineConfig:
    # data
    dataset_root: str = ""
    out_dir: str = "run"
    synth: bool = False
    synth_classes: int = 4
    synth_per_class: int = 64
    synth_size: int = 128
    # preprocessing
    target_width: int = 64
    norm_min: float = 0.0
    norm_max: float = 1.0
    per_channel_norm: bool = False
    # extractor
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    num_layers: int = 4
    num_heads: int = 4
    mlp_dim: int = 128
    tail_features: int = 1024
    blockwise_factor: float = 0.75
    ffn_activation: str = "outer"
    vit_weights: str = ""
    variants: tuple = VARIANTS
    # classifier and training
    archs: tuple = ("arch1", "arch2")
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 25
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    split: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ConfigError(f"variants must be a non-empty subset of {VARIANTS}, got {self.variants}")
        bad = [a for a in self.archs if a not in ARCHITECTURES]
        if bad or not self.archs:
            raise ConfigError(f"archs must be a non-empty subset of {sorted(ARCHITECTURES)}")
        if not self.norm_max > self.norm_min:
            raise ConfigError("norm_max must exceed norm_min")
        if self.target_width < 1:
            raise ConfigError("target_width must be >= 1")
        if min(self.synth_classes, self.synth_per_class, self.synth_size) < 1:
            raise ConfigError("synthetic dataset sizes must be >= 1")
        self.vit_config()
        self.train_config()

    def vit_config(self, variant=None):
        return ViTConfig(
            image_size=self.image_size, patch_size=self.patch_size, embed_dim=self.embed_dim,
            num_layers=self.num_layers, num_heads=self.num_heads, mlp_dim=self.mlp_dim,
            variant=variant or self.variants[0], tail_features=self.tail_features,
            blockwise_factor=self.blockwise_factor, seed=self.seed,
            ffn_activation=self.ffn_activation,
        )

    def train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience, beta1=self.beta1,
            beta2=self.beta2, eps_adam=self.eps_adam, seed=self.seed, split=self.split,
        )

    def check_paths(self):
        if not self.synth and not os.path.isdir(self.dataset_root):
            raise ConfigError(f"dataset_root {self.dataset_root!r} does not exist")
        if self.vit_weights and not os.path.isfile(self.vit_weights):
            raise ConfigError(f"vit_weights {self.vit_weights!r} does not exist")

    def to_text(self):
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _convert(raw, default, key, lineno):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw, 0)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: invalid value {raw!r} for {key}") from None


def parse_config(text, **overrides):
    """Build a :class:`PipelineConfig` from config text plus keyword overrides."""
    defaults = {f.name: f.default for f in fields(PipelineConfig)}
    values = {}
    for key, (raw, lineno) in parse_key_values(text, defaults).items():
        values[key] = _convert(raw, defaults[key], key, lineno)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def load_config(path=None, **overrides):
    text = ""
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, **overrides)
