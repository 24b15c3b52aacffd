"""Training configuration and the two published hyperparameter presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid or unknown configuration field."""


@dataclass(frozen=True)
class TrainConfig:
    context: int = 2
    learning_rate: float = 0.01
    optimizer: str = "sgd"
    batch_size: int = 70
    dropout: float = 0.5
    widths: tuple[int, ...] = (3, 4, 5)
    filters_per_width: int = 100
    embedding_dim: int = 300
    max_epochs: int = 100
    patience: int = 10
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    max_len: int = 100
    min_freq: int = 1
    lowercase: bool = True
    strip_punct: bool = False
    head: str = "crf"
    averaging: bool = False
    adagrad_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        checks = [
            (self.context >= 0, "context", "must be >= 0"),
            (self.learning_rate > 0, "learning_rate", "must be > 0"),
            (self.optimizer in ("sgd", "adagrad"), "optimizer", "must be 'sgd' or 'adagrad'"),
            (self.batch_size >= 1, "batch_size", "must be >= 1"),
            (0 <= self.dropout < 1, "dropout", "must be in [0, 1)"),
            (len(self.widths) > 0 and min(self.widths) >= 1, "widths", "must be positive"),
            (self.filters_per_width >= 1, "filters_per_width", "must be >= 1"),
            (self.embedding_dim >= 1, "embedding_dim", "must be >= 1"),
            (self.max_epochs >= 1, "max_epochs", "must be >= 1"),
            (self.patience >= 0, "patience", "must be >= 0"),
            (len(self.seeds) > 0, "seeds", "must not be empty"),
            (self.max_len >= 1, "max_len", "must be >= 1"),
            (self.min_freq >= 1, "min_freq", "must be >= 1"),
            (self.head in ("crf", "softmax"), "head", "must be 'crf' or 'softmax'"),
            (self.adagrad_eps > 0, "adagrad_eps", "must be > 0"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

    @classmethod
    def mrda(cls, **overrides) -> "TrainConfig":
        """Meeting-corpus preset: plain SGD, rate 0.01, batches of 70."""
        return cls(**{"learning_rate": 0.01, "batch_size": 70, "optimizer": "sgd", **overrides})

    @classmethod
    def swda(cls, **overrides) -> "TrainConfig":
        """Switchboard preset: AdaGrad, rate 0.07, batches of 170."""
        return cls(**{"learning_rate": 0.07, "batch_size": 170, "optimizer": "adagrad", **overrides})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["widths"] = list(self.widths)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


TRAIN_FIELDS = frozenset(f.name for f in dataclasses.fields(TrainConfig))
