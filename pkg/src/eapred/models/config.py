from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from eapred.errors import ConfigError

KINDS = ("logreg", "lstm", "attention")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "lstm"
    input_dim: int = 21
    seq_len: int = 30
    classes: int = 3
    seed: int = 0
    dropout: float = 0.5
    # lstm
    lstm_layers: int = 2
    hidden: int = 64
    # attention
    attn_layers: int = 2
    heads: int = 4
    ff_dim: int = 256
    model_dim: int = 64
    positional_encoding: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"model kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        for name in ("input_dim", "seq_len", "classes", "lstm_layers", "hidden", "attn_layers", "heads", "ff_dim", "model_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} is not divisible by heads {self.heads}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def reduced_config(kind, input_dim=21, seq_len=5, seed=0, **kw):
    """Small shapes used by the gradient-check suite."""
    base = dict(kind=kind, input_dim=input_dim, seq_len=seq_len, seed=seed, hidden=8, model_dim=8, heads=2, ff_dim=16)
    base.update(kw)
    return ModelConfig(**base)
