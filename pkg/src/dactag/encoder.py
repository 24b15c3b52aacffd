"""CNN utterance encoder with exact backward pass.

Every utterance slot of a window is encoded independently with one shared
filter bank: full-depth 1-D cross-correlation over the token axis, ReLU,
max over the utterance's positions, concatenation across filters (in width
order) and inverted dropout.

Each utterance grid is widened with ``|f| - 1`` PAD columns on both sides
per filter width, so every width yields a non-empty feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import PAD, ContextWindow
from .embedding import EmbeddingTable


@dataclass
class ConvFilterBank:
    """Filters per width, each stored as ``(filters, width, d)`` plus biases."""

    widths: tuple[int, ...]
    filters: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.filters) != len(self.widths) or len(self.biases) != len(self.widths):
            raise ValueError("one filter array and one bias vector per width")
        for w, f, b in zip(self.widths, self.filters, self.biases):
            if f.ndim != 3 or f.shape[1] != w or b.shape != (f.shape[0],):
                raise ValueError(f"bad filter/bias shape for width {w}: {f.shape}, {b.shape}")

    @classmethod
    def init(cls, widths=(3, 4, 5), filters_per_width=100, d=300, rng=None) -> "ConvFilterBank":
        rng = np.random.default_rng(0) if rng is None else rng
        filters, biases = [], []
        for w in widths:
            limit = np.sqrt(6.0 / (w * d + filters_per_width))
            filters.append(rng.uniform(-limit, limit, size=(filters_per_width, w, d)))
            biases.append(np.zeros(filters_per_width))
        return cls(tuple(widths), filters, biases)

    @property
    def d(self) -> int:
        return self.filters[0].shape[2]

    @property
    def output_dim(self) -> int:
        return sum(f.shape[0] for f in self.filters)

    def n_params(self) -> int:
        return sum(f.size + b.size for f, b in zip(self.filters, self.biases))


@dataclass
class PooledVector:
    p: np.ndarray
    # Per-feature position (in the widened map) of the pooled maximum.
    argmax_cache: np.ndarray


def convolve(emb: np.ndarray, filt: np.ndarray, bias: float = 0.0) -> np.ndarray:
    """Full-depth cross-correlation of a ``d x L`` matrix with a ``|f| x d`` filter.

    No padding is added; the map has ``L - |f| + 1`` entries.
    """
    emb = np.asarray(emb, dtype=np.float64)
    filt = np.asarray(filt, dtype=np.float64)
    d, L = emb.shape
    width = filt.shape[0]
    if filt.shape[1] != d:
        raise ValueError(f"filter depth {filt.shape[1]} does not match embedding dim {d}")
    if width > L:
        raise ValueError(f"filter width {width} exceeds utterance length {L}")
    windows = sliding_window_view(emb, width, axis=1)  # (d, L-w+1, w)
    return np.einsum("dkw,wd->k", windows, filt) + bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def max_pool_utterance(fmap) -> tuple[float, int]:
    """Largest activation of one utterance's map and its first position."""
    fmap = np.asarray(fmap)
    if fmap.size == 0:
        raise ValueError("cannot pool an empty feature map")
    k = int(np.argmax(fmap))
    return float(fmap[k]), k


@dataclass
class EncoderCache:
    grids: np.ndarray  # (B, L) token ids
    windows: list[np.ndarray]  # per width: (B, L + w - 1, d, w) views of widened embeddings
    argmax: list[np.ndarray]  # per width: (B, F)
    active: list[np.ndarray]  # per width: (B, F) pooled pre-activation > 0
    dropout_mask: np.ndarray | None  # (B, F_total) scaled keep mask


def encode_grids(
    grids: np.ndarray,
    bank: ConvFilterBank,
    table: EmbeddingTable,
    dropout_rate: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, EncoderCache]:
    """Encode a batch of ``(B, L)`` token grids into ``(B, F_total)`` vectors."""
    grids = np.asarray(grids, dtype=np.int64)
    if grids.ndim != 2:
        raise ValueError("grids must be (batch, max_len)")
    if table.dim != bank.d:
        raise ValueError(f"embedding dim {table.dim} does not match filter depth {bank.d}")
    emb = table.matrix[grids]  # (B, L, d)
    B = grids.shape[0]

    pooled, all_windows, all_arg, all_active = [], [], [], []
    for width, filt, bias in zip(bank.widths, bank.filters, bank.biases):
        pad = np.zeros((B, width - 1, bank.d))
        wide = np.concatenate([pad, emb, pad], axis=1)
        windows = sliding_window_view(wide, width, axis=1)  # (B, P, d, w)
        pre = np.einsum("bpdw,fwd->bpf", windows, filt, optimize=True) + bias
        arg = np.argmax(pre, axis=1)  # relu is monotone: pooling pre-activations is equivalent
        top = np.take_along_axis(pre, arg[:, None, :], axis=1)[:, 0, :]
        pooled.append(relu(top))
        all_windows.append(windows)
        all_arg.append(arg)
        all_active.append(top > 0)
    p = np.concatenate(pooled, axis=1)

    mask = None
    if train and dropout_rate > 0:
        if not 0 <= dropout_rate < 1:
            raise ValueError("dropout rate must be in [0, 1)")
        rng = np.random.default_rng() if rng is None else rng
        mask = (rng.random(p.shape) >= dropout_rate) / (1.0 - dropout_rate)
        p = p * mask
    return p, EncoderCache(grids, all_windows, all_arg, all_active, mask)


def encode_window(
    w: ContextWindow,
    bank: ConvFilterBank,
    table: EmbeddingTable,
    dropout_rate: float = 0.5,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> list[PooledVector]:
    """One pooled vector per slot of ``w`` (oldest first)."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    p, cache = encode_grids(w.grids, bank, table, dropout_rate, mode == "train", rng)
    arg = np.concatenate(cache.argmax, axis=1)
    return [PooledVector(p[i], arg[i]) for i in range(len(p))]


@dataclass
class EncoderGrads:
    filters: list[np.ndarray]
    biases: list[np.ndarray]
    # Sparse embedding gradient: token ids and matching rows (PAD excluded).
    emb_ids: np.ndarray
    emb_rows: np.ndarray


def encoder_backward(dp: np.ndarray, cache: EncoderCache, bank: ConvFilterBank) -> EncoderGrads:
    """Backpropagate ``dLoss/dp`` (shape ``(B, F_total)``) through the encoder."""
    dp = np.asarray(dp, dtype=np.float64)
    B = cache.grids.shape[0]
    if dp.shape != (B, bank.output_dim):
        raise ValueError(f"upstream gradient shape {dp.shape} != {(B, bank.output_dim)}")
    if len(cache.argmax) != len(bank.widths):
        raise ValueError("cache does not match the filter bank")
    if cache.dropout_mask is not None:
        dp = dp * cache.dropout_mask

    L = cache.grids.shape[1]
    d = bank.d
    d_emb = np.zeros((B, L, d))
    dfilters, dbiases = [], []
    b_idx = np.arange(B)[:, None]
    offset = 0
    for width, filt, windows, arg, active in zip(
        bank.widths, bank.filters, cache.windows, cache.argmax, cache.active
    ):
        F = filt.shape[0]
        g = dp[:, offset : offset + F] * active  # (B, F)
        offset += F
        dbiases.append(g.sum(axis=0))
        picked = windows[b_idx, arg]  # (B, F, d, w)
        dfilters.append(np.einsum("bf,bfdw->fwd", g, picked, optimize=True))
        # Position p of the widened map covers original columns p-(w-1) .. p.
        d_wide = np.zeros((B, L + 2 * (width - 1), d))
        contrib = g[:, :, None, None] * filt[None]  # (B, F, w, d)
        for j in range(width):
            np.add.at(d_wide, (np.broadcast_to(b_idx, arg.shape), arg + j), contrib[:, :, j, :])
        d_emb += d_wide[:, width - 1 : width - 1 + L]

    ids = cache.grids.ravel()
    rows = d_emb.reshape(-1, d)
    keep = ids != PAD
    return EncoderGrads(dfilters, dbiases, ids[keep], rows[keep])
