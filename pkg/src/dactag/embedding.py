"""Trainable word-embedding table and text-format pretrained vector loading."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import PAD, Vocabulary
from .optim import NumericalError, OptimizerState

logger = logging.getLogger(__name__)

OOV_RANGE = 0.25


@dataclass
class EmbeddingTable:
    """``|V| x d`` matrix whose row 0 (PAD) is pinned to zero."""

    matrix: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        self.matrix[PAD] = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def random(cls, size: int, dim: int, rng: np.random.Generator, scale: float = OOV_RANGE):
        return cls(rng.uniform(-scale, scale, size=(size, dim)))


@dataclass
class Coverage:
    found: int
    total: int

    @property
    def fraction(self) -> float:
        return self.found / self.total if self.total else 0.0

    def __str__(self) -> str:
        return f"{self.found}/{self.total}"


def read_vectors(path, dim: int) -> Iterable[tuple[str, np.ndarray]]:
    """Yield ``(token, vector)`` pairs from a word2vec/GloVe-style text file.

    An optional ``"<count> <dim>"`` header line is skipped.
    """
    path = Path(path)
    with path.open(encoding="utf-8", errors="strict") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) - 1 != dim:
                raise ValueError(
                    f"{path}:{lineno}: token {parts[0]!r} has {len(parts) - 1} values, expected {dim}"
                )
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector entry") from None
            yield parts[0], vec


def load_pretrained(
    path,
    vocab: Vocabulary,
    d: int = 300,
    rng: np.random.Generator | None = None,
) -> tuple[EmbeddingTable, Coverage]:
    """Build a table for ``vocab`` from a text embedding file.

    Tokens missing from the file are drawn uniformly from [-0.25, 0.25].
    Coverage counts vocabulary entries (PAD and UNK included) found in the file.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    table = EmbeddingTable.random(len(vocab), d, rng)
    found = set()
    for token, vec in read_vectors(path, d):
        idx = vocab.id(token)
        if token in vocab and idx != PAD:
            table.matrix[idx] = vec
            found.add(idx)
    table.matrix[PAD] = 0.0
    cov = Coverage(len(found), len(vocab))
    logger.info("pretrained vectors cover %s vocabulary entries", cov)
    return table, cov


def lookup(grid, table: EmbeddingTable) -> np.ndarray:
    """``d x L`` matrix whose column j is the embedding of ``grid[j]``."""
    grid = np.asarray(grid, dtype=np.int64)
    if grid.size and (grid.min() < 0 or grid.max() >= len(table)):
        raise IndexError(f"token id out of range for a table of {len(table)} rows")
    return table.matrix[grid].T


def apply_sparse_grad(table: EmbeddingTable, grad_entries, state: OptimizerState) -> None:
    """Update only the rows named in ``grad_entries``.

    ``grad_entries`` is a list of ``(token_id, vector)`` pairs or an
    ``(ids, rows)`` array pair; repeated ids are summed before the update.
    AdaGrad accumulators live in ``state.accum["embedding"]``.
    """
    if not table.trainable:
        raise RuntimeError("embedding table is frozen")
    if isinstance(grad_entries, tuple) and len(grad_entries) == 2 and isinstance(grad_entries[0], np.ndarray):
        ids, rows = grad_entries
    else:
        entries = list(grad_entries)
        if not entries:
            return
        ids = np.array([i for i, _ in entries], dtype=np.int64)
        rows = np.stack([np.asarray(v, dtype=np.float64) for _, v in entries])
    if len(ids) == 0:
        return
    uniq, inv = np.unique(ids, return_inverse=True)
    summed = np.zeros((len(uniq), table.dim))
    np.add.at(summed, inv, rows)
    if not np.all(np.isfinite(summed)):
        raise NumericalError("non-finite gradient in parameter group 'embedding'")

    if state.kind == "sgd":
        table.matrix[uniq] -= state.rate * summed
    else:
        acc = state.accum.setdefault("embedding", np.zeros_like(table.matrix))
        acc[uniq] += summed * summed
        table.matrix[uniq] -= state.rate * summed / (np.sqrt(acc[uniq]) + state.eps)
    table.matrix[PAD] = 0.0
