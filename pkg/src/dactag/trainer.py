"""Mini-batch training, validation-based model selection and multi-seed runs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .config import TrainConfig
from .corpus import NO_LABEL, CorpusSplit, LabelSet, Vocabulary, build_vocab, corpus_windows
from .embedding import EmbeddingTable, apply_sparse_grad, load_pretrained
from .model import DialogActModel, WindowBatch
from .optim import NumericalError, OptimizerState, adagrad_step, sgd_step

logger = logging.getLogger(__name__)

__all__ = [
    "FitResult",
    "OptimizerState",
    "ParameterAverager",
    "SeedRun",
    "adagrad_step",
    "fit",
    "fit_seed",
    "init_model",
    "sgd_step",
    "train_epoch",
]


class ParameterAverager:
    """Running (Polyak) average of all model parameters, updated after each step."""

    def __init__(self, model: DialogActModel):
        self.model = model.copy()
        self.n = 1

    def update(self, model: DialogActModel) -> None:
        self.n += 1
        self.model.table.matrix += (model.table.matrix - self.model.table.matrix) / self.n
        avg = self.model.dense_params()
        for name, value in model.dense_params().items():
            avg[name] += (value - avg[name]) / self.n


def init_model(
    config: TrainConfig,
    vocab: Vocabulary,
    labels: LabelSet,
    rng: np.random.Generator,
    embeddings=None,
) -> DialogActModel:
    """Fresh model; ``embeddings`` is an optional text vector file."""
    table = None
    if embeddings is not None:
        table, _ = load_pretrained(embeddings, vocab, config.embedding_dim, rng)
    return DialogActModel.init(
        len(vocab),
        len(labels),
        rng,
        d=config.embedding_dim,
        widths=config.widths,
        filters_per_width=config.filters_per_width,
        head=config.head,
        table=table,
    )


def train_epoch(
    model: DialogActModel,
    windows,
    config: TrainConfig,
    rng: np.random.Generator,
    state: OptimizerState | None = None,
    averager: ParameterAverager | None = None,
) -> float:
    """One shuffled pass over ``windows``; returns the mean training loss.

    Gradients are averaged within each mini-batch and one optimizer step is
    taken per batch. ``state`` carries AdaGrad accumulators across epochs.
    """
    batch = windows if isinstance(windows, WindowBatch) else WindowBatch.from_windows(list(windows))
    if len(batch) == 0:
        raise ValueError("no training windows")
    if state is None:
        state = OptimizerState(config.optimizer, config.learning_rate, config.adagrad_eps)
    params = model.dense_params()
    order = rng.permutation(len(batch))
    total = 0.0
    for i, lo in enumerate(range(0, len(batch), config.batch_size)):
        part = batch.take(order[lo : lo + config.batch_size])
        loss, _, grads = model.loss_and_grads(part, config.dropout, rng, train=True)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss in batch {i}")
        emb_grad = grads.pop("embedding")
        state.step(params, grads)
        if model.table.trainable:
            apply_sparse_grad(model.table, emb_grad, state)
        if averager is not None:
            averager.update(model)
        total += loss * len(part)
    return total / len(batch)


def _accuracy(model: DialogActModel, batch: WindowBatch) -> float:
    gold = batch.gold[:, -1]
    keep = gold != NO_LABEL
    pred = model.predict(batch)
    return float(np.mean(pred[keep] == gold[keep]))


@dataclass
class SeedRun:
    seed: int
    checkpoint: Checkpoint
    log: list[dict]
    epochs: int


@dataclass
class FitResult:
    runs: list[SeedRun]
    vocab: Vocabulary
    labels: LabelSet
    log: list[dict] = field(default_factory=list)

    @property
    def best(self) -> Checkpoint:
        """Checkpoint with the highest validation accuracy (earliest seed on ties)."""
        return max(self.runs, key=lambda r: r.checkpoint.valid_accuracy).checkpoint

    @property
    def checkpoints(self) -> list[Checkpoint]:
        return [r.checkpoint for r in self.runs]

    def summary(self) -> dict:
        accs = [r.checkpoint.valid_accuracy for r in self.runs]
        return {"avg": float(np.mean(accs)), "min": float(min(accs)), "max": float(max(accs))}


def fit_seed(
    train: WindowBatch,
    valid: WindowBatch,
    vocab: Vocabulary,
    labels: LabelSet,
    config: TrainConfig,
    seed: int,
    embeddings=None,
) -> SeedRun:
    """Train one model from ``seed``; keeps the best-validation-accuracy parameters."""
    rng = np.random.default_rng(seed)
    model = init_model(config, vocab, labels, rng, embeddings)
    state = OptimizerState(config.optimizer, config.learning_rate, config.adagrad_eps)
    averager = ParameterAverager(model) if config.averaging else None

    log: list[dict] = []
    best_acc, best_model, best_epoch, since_best = -1.0, None, 0, 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        train_loss = train_epoch(model, train, config, rng, state, averager)
        current = averager.model if averager is not None else model
        val_acc = _accuracy(current, valid)
        val_loss = current.loss(valid)
        log.append({"seed": seed, "epoch": epoch, "split": "train", "loss": train_loss, "accuracy": None})
        log.append({"seed": seed, "epoch": epoch, "split": "valid", "loss": val_loss, "accuracy": val_acc})
        logger.debug("seed %d epoch %d: train loss %.4f, valid acc %.4f", seed, epoch, train_loss, val_acc)
        if val_acc > best_acc:
            best_acc, best_model, best_epoch, since_best = val_acc, current.copy(), epoch, 0
        else:
            since_best += 1
            if since_best > config.patience:
                break
    ckpt = Checkpoint(best_model, vocab, labels, config, best_epoch, best_acc, seed)
    log.append(
        {"seed": seed, "event": "run", "epochs": epoch, "best_epoch": best_epoch, "valid_accuracy": best_acc}
    )
    return SeedRun(seed, ckpt, log, epoch)


def fit(splits: CorpusSplit, config: TrainConfig, embeddings=None, seeds=None) -> FitResult:
    """Train once per seed on ``splits.train``, selecting on ``splits.valid``."""
    if not splits.train or not splits.valid:
        raise ValueError("fit needs non-empty train and valid splits")
    if len(splits.labels) < 2:
        raise ValueError("CRF training needs at least two labels")
    vocab = build_vocab(splits.train, config.min_freq)
    train = WindowBatch.from_windows(
        corpus_windows(splits.train, config.context, vocab, config.max_len, splits.labels)
    )
    valid = WindowBatch.from_windows(
        corpus_windows(splits.valid, config.context, vocab, config.max_len, splits.labels)
    )
    runs = []
    for seed in config.seeds if seeds is None else seeds:
        runs.append(fit_seed(train, valid, vocab, splits.labels, config, seed, embeddings))
    log = [rec for r in runs for rec in r.log]
    return FitResult(runs, vocab, splits.labels, log)
