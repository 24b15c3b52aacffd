"""The full CNN + CRF dialog-act tagger: encoder, projection and CRF (or softmax) head."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .corpus import NO_LABEL, ContextWindow
from .crf import (
    ScoreProjection,
    TransitionParams,
    nll_and_grads_batch,
    softmax_grads,
    viterbi_batch,
)
from .embedding import EmbeddingTable
from .encoder import ConvFilterBank, encode_grids, encoder_backward

HEADS = ("crf", "softmax")


@dataclass
class WindowBatch:
    grids: np.ndarray  # (N, n+1, max_len)
    gold: np.ndarray  # (N, n+1)
    pad_mask: np.ndarray  # (N, n+1)

    @classmethod
    def from_windows(cls, windows: list[ContextWindow]) -> "WindowBatch":
        if not windows:
            raise ValueError("empty window list")
        return cls(
            np.stack([w.grids for w in windows]),
            np.stack([w.gold_labels for w in windows]),
            np.stack([w.pad_mask for w in windows]),
        )

    def __len__(self) -> int:
        return len(self.grids)

    def take(self, idx) -> "WindowBatch":
        return WindowBatch(self.grids[idx], self.gold[idx], self.pad_mask[idx])


@dataclass
class DialogActModel:
    table: EmbeddingTable
    bank: ConvFilterBank
    proj: ScoreProjection
    trans: TransitionParams
    head: str = "crf"

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.proj.W.shape[1] != self.bank.output_dim:
            raise ValueError("projection input does not match the encoder output")
        if self.trans.n_labels != self.n_labels:
            raise ValueError("transition size does not match the label count")

    @classmethod
    def init(
        cls,
        vocab_size: int,
        n_labels: int,
        rng: np.random.Generator,
        d: int = 300,
        widths=(3, 4, 5),
        filters_per_width: int = 100,
        head: str = "crf",
        table: EmbeddingTable | None = None,
    ) -> "DialogActModel":
        if table is None:
            table = EmbeddingTable.random(vocab_size, d, rng)
        bank = ConvFilterBank.init(widths, filters_per_width, table.dim, rng)
        proj = ScoreProjection.init(n_labels, bank.output_dim, rng)
        return cls(table, bank, proj, TransitionParams.zeros(n_labels), head)

    @property
    def n_labels(self) -> int:
        return self.proj.W.shape[0]

    def dense_params(self) -> dict[str, np.ndarray]:
        """Named views of every parameter except the embedding table, in checkpoint order."""
        params = {}
        for w, f, b in zip(self.bank.widths, self.bank.filters, self.bank.biases):
            params[f"conv{w}.filters"] = f
            params[f"conv{w}.bias"] = b
        params["proj.W"] = self.proj.W
        params["proj.b"] = self.proj.b
        params["crf.T"] = self.trans.T
        params["crf.start"] = self.trans.start
        return params

    def copy(self) -> "DialogActModel":
        return copy.deepcopy(self)

    # -- forward / backward ------------------------------------------------

    def scores(self, batch: WindowBatch, train=False, dropout_rate=0.0, rng=None):
        N, slots, max_len = batch.grids.shape
        P, cache = encode_grids(
            batch.grids.reshape(N * slots, max_len), self.bank, self.table, dropout_rate, train, rng
        )
        S = (P @ self.proj.W.T + self.proj.b).reshape(N, slots, -1)
        return S, P, cache

    def loss_and_grads(self, batch: WindowBatch, dropout_rate=0.0, rng=None, train=True):
        """Mean window loss and its gradients.

        Returns ``(mean_loss, per_window_losses, grads)`` where ``grads`` maps
        every dense parameter name to an array and ``"embedding"`` to an
        ``(ids, rows)`` sparse pair.
        """
        N, slots, _ = batch.grids.shape
        real = ~batch.pad_mask
        if np.any(batch.gold[real] == NO_LABEL):
            raise ValueError("training windows need gold labels on every real slot")
        S, P, cache = self.scores(batch, train, dropout_rate, rng)
        C = self.n_labels

        losses = np.zeros(N)
        dS = np.zeros_like(S)
        dT = np.zeros((C, C))
        dstart = np.zeros(C)
        if self.head == "crf":
            n_pad = batch.pad_mask.sum(axis=1)
            for k in np.unique(n_pad):
                idx = np.flatnonzero(n_pad == k)
                loss_k, dS_k, dT_k, dstart_k = nll_and_grads_batch(
                    S[idx, k:], self.trans, batch.gold[idx, k:]
                )
                losses[idx] = loss_k
                dS[idx, k:] = dS_k
                dT += dT_k
                dstart += dstart_k
        else:
            losses, dS[:, -1] = softmax_grads(S[:, -1], batch.gold[:, -1])

        scale = 1.0 / N
        dS *= scale
        dS_flat = dS.reshape(N * slots, C)
        grads = {}
        enc = encoder_backward(dS_flat @ self.proj.W, cache, self.bank)
        for w, gf, gb in zip(self.bank.widths, enc.filters, enc.biases):
            grads[f"conv{w}.filters"] = gf
            grads[f"conv{w}.bias"] = gb
        grads["proj.W"] = dS_flat.T @ P
        grads["proj.b"] = dS_flat.sum(axis=0)
        grads["crf.T"] = dT * scale
        grads["crf.start"] = dstart * scale
        if self.head == "softmax":
            # The softmax head never touches the transition parameters.
            grads["crf.T"] = np.zeros_like(self.trans.T)
            grads["crf.start"] = np.zeros_like(self.trans.start)
        grads["embedding"] = (enc.emb_ids, enc.emb_rows)
        return float(losses.mean()), losses, grads

    def loss(self, batch: WindowBatch) -> float:
        """Mean inference-mode loss (no dropout)."""
        return self.loss_and_grads(batch, train=False)[0]

    def predict(self, batch: WindowBatch, chunk: int = 512) -> np.ndarray:
        """Label index of the current (last) slot of every window."""
        out = np.zeros(len(batch), dtype=np.int64)
        for lo in range(0, len(batch), chunk):
            part = batch.take(slice(lo, lo + chunk))
            S, _, _ = self.scores(part)
            if self.head == "softmax":
                out[lo : lo + len(part)] = np.argmax(S[:, -1], axis=1)
                continue
            n_pad = part.pad_mask.sum(axis=1)
            for k in np.unique(n_pad):
                idx = np.flatnonzero(n_pad == k)
                paths, _ = viterbi_batch(S[idx, k:], self.trans)
                out[lo + idx] = paths[:, -1]
        return out


def predict_label(window: ContextWindow, model: DialogActModel) -> int:
    """Encoder, projection and Viterbi on one window; the current slot's label index."""
    return int(model.predict(WindowBatch.from_windows([window]))[0])
