"""Plain SGD and AdaGrad updates over named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericalError(FloatingPointError):
    """A loss or gradient became non-finite."""


@dataclass
class OptimizerState:
    """Optimizer kind, rate and (for AdaGrad) squared-gradient accumulators."""

    kind: str = "sgd"
    rate: float = 0.01
    eps: float = 1e-8
    accum: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adagrad"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.rate > 0:
            raise ValueError("learning rate must be positive")

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        if self.kind == "sgd":
            sgd_step(params, grads, self.rate)
        else:
            adagrad_step(params, grads, self, self.rate)


def _check_finite(grads: dict[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter group {name!r}")


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], rate: float) -> None:
    """In place: theta <- theta - rate * g for every name in ``grads``."""
    _check_finite(grads)
    for name, g in grads.items():
        if params[name].shape != g.shape:
            raise ValueError(f"shape mismatch for {name!r}: {params[name].shape} vs {g.shape}")
        params[name] -= rate * g


def adagrad_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    rate: float | None = None,
) -> None:
    """In place: G <- G + g**2; theta <- theta - rate * g / (sqrt(G) + eps)."""
    rate = state.rate if rate is None else rate
    _check_finite(grads)
    for name, g in grads.items():
        if params[name].shape != g.shape:
            raise ValueError(f"shape mismatch for {name!r}: {params[name].shape} vs {g.shape}")
        acc = state.accum.setdefault(name, np.zeros_like(params[name]))
        if acc.shape != g.shape:
            raise ValueError(f"accumulator shape mismatch for {name!r}")
        acc += g * g
        params[name] -= rate * g / (np.sqrt(acc) + state.eps)
