"""Score projection, exact linear-chain CRF and the softmax baseline head.

A label sequence ``y`` over a score matrix ``S`` (``L x C``) scores

    start[y_0] + sum_t S[t, y_t] + sum_{t>0} T[y_{t-1}, y_t]

and ``p(y | S) = exp(score(y)) / Z(S)``. All dynamic programs run in log
space. The ``*_batch`` functions take ``(B, L, C)`` score tensors with every
position real; the single-sequence functions accept a ``pad_mask`` and drop
the padded leading slots before calling them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ScoreProjection:
    """Shared linear map from pooled vectors to label scores: ``s = W p + b``."""

    W: np.ndarray  # (C, p_dim)
    b: np.ndarray  # (C,)

    @classmethod
    def init(cls, n_labels: int, p_dim: int, rng: np.random.Generator) -> "ScoreProjection":
        limit = np.sqrt(6.0 / (n_labels + p_dim))
        return cls(rng.uniform(-limit, limit, size=(n_labels, p_dim)), np.zeros(n_labels))


@dataclass
class TransitionParams:
    T: np.ndarray  # (C, C); T[i, j] scores label j following label i
    start: np.ndarray  # (C,)

    @classmethod
    def zeros(cls, n_labels: int) -> "TransitionParams":
        return cls(np.zeros((n_labels, n_labels)), np.zeros(n_labels))

    @property
    def n_labels(self) -> int:
        return len(self.start)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("CRF inputs must be finite")


def _real_slots(S, pad_mask):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError("scores must be an L x C matrix")
    if pad_mask is None:
        return S, 0
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if pad_mask.shape != (len(S),):
        raise ValueError("pad_mask length does not match the scores")
    k = int(pad_mask.sum())
    if pad_mask[:k].sum() != k:
        raise ValueError("padding slots must be leading")
    if k == len(S):
        raise ValueError("all slots are padding")
    return S[k:], k


# ---------------------------------------------------------------------------
# projection


def project_scores(p_vectors, proj: ScoreProjection) -> np.ndarray:
    """``S[t] = W p_t + b`` for every slot; returns an ``L x C`` matrix."""
    P = np.stack([getattr(p, "p", p) for p in p_vectors]) if isinstance(p_vectors, list) else p_vectors
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if P.shape[1] != proj.W.shape[1]:
        raise ValueError(f"pooled dim {P.shape[1]} does not match projection input {proj.W.shape[1]}")
    return P @ proj.W.T + proj.b


# ---------------------------------------------------------------------------
# batched dynamic programs


def forward_batch(S: np.ndarray, trans: TransitionParams) -> np.ndarray:
    """Forward log-messages ``alpha`` of shape ``(B, L, C)``."""
    B, L, C = S.shape
    alpha = np.empty_like(S)
    alpha[:, 0] = trans.start + S[:, 0]
    for t in range(1, L):
        alpha[:, t] = S[:, t] + _logsumexp(alpha[:, t - 1, :, None] + trans.T, axis=1)
    return alpha


def backward_batch(S: np.ndarray, trans: TransitionParams) -> np.ndarray:
    B, L, C = S.shape
    beta = np.zeros_like(S)
    for t in range(L - 2, -1, -1):
        beta[:, t] = _logsumexp(trans.T + (S[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    return beta


def log_partition_batch(S: np.ndarray, trans: TransitionParams) -> np.ndarray:
    return _logsumexp(forward_batch(S, trans)[:, -1], axis=1)


def marginals_batch(S: np.ndarray, trans: TransitionParams):
    """Returns ``(log_Z, unary (B, L, C), pairwise (B, L-1, C, C))``."""
    alpha = forward_batch(S, trans)
    beta = backward_batch(S, trans)
    log_z = _logsumexp(alpha[:, -1], axis=1)
    unary = np.exp(alpha + beta - log_z[:, None, None])
    pair_log = (
        alpha[:, :-1, :, None]
        + trans.T
        + (S[:, 1:] + beta[:, 1:])[:, :, None, :]
        - log_z[:, None, None, None]
    )
    return log_z, unary, np.exp(pair_log)


def sequence_score_batch(S: np.ndarray, trans: TransitionParams, labels: np.ndarray) -> np.ndarray:
    B, L, _ = S.shape
    rows = np.arange(B)[:, None]
    score = trans.start[labels[:, 0]] + S[rows, np.arange(L), labels].sum(axis=1)
    if L > 1:
        score = score + trans.T[labels[:, :-1], labels[:, 1:]].sum(axis=1)
    return score


def nll_and_grads_batch(S: np.ndarray, trans: TransitionParams, labels: np.ndarray):
    """Per-sequence NLL plus gradients (dS per sequence, dT and dstart summed)."""
    B, L, C = S.shape
    if C == 1:
        # Point mass: skip the DP so the loss is exactly zero.
        return np.zeros(B), np.zeros_like(S), np.zeros((1, 1)), np.zeros(1)
    log_z, unary, pairwise = marginals_batch(S, trans)
    loss = log_z - sequence_score_batch(S, trans, labels)

    onehot = np.zeros_like(S)
    np.put_along_axis(onehot, labels[:, :, None], 1.0, axis=2)
    dS = unary - onehot
    dstart = unary[:, 0].sum(axis=0) - onehot[:, 0].sum(axis=0)
    dT = pairwise.sum(axis=(0, 1))
    if L > 1:
        np.add.at(dT, (labels[:, :-1].ravel(), labels[:, 1:].ravel()), -1.0)
    return loss, dS, dT, dstart


def viterbi_batch(S: np.ndarray, trans: TransitionParams):
    """Best paths ``(B, L)`` and their scores; ties go to the lowest label."""
    B, L, C = S.shape
    delta = trans.start + S[:, 0]
    back = np.zeros((B, L, C), dtype=np.int64)
    for t in range(1, L):
        cand = delta[:, :, None] + trans.T  # (B, prev, cur)
        back[:, t] = np.argmax(cand, axis=1)
        delta = np.take_along_axis(cand, back[:, t][:, None, :], axis=1)[:, 0] + S[:, t]
    paths = np.zeros((B, L), dtype=np.int64)
    paths[:, -1] = np.argmax(delta, axis=1)
    for t in range(L - 1, 0, -1):
        paths[:, t - 1] = back[np.arange(B), t, paths[:, t]]
    return paths, delta[np.arange(B), paths[:, -1]]


# ---------------------------------------------------------------------------
# single-sequence API


def log_partition(S, trans: TransitionParams) -> float:
    """log Z by the forward recursion."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or len(S) < 1:
        raise ValueError("scores must be an L x C matrix with L >= 1")
    _check_finite(S, trans.T, trans.start)
    return float(log_partition_batch(S[None], trans)[0])


def sequence_score(S, trans: TransitionParams, labels) -> float:
    S = np.asarray(S, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(S),):
        raise ValueError(f"expected {len(S)} labels, got {labels.shape}")
    if labels.min() < 0 or labels.max() >= S.shape[1]:
        raise ValueError("label index out of range")
    return float(sequence_score_batch(S[None], trans, labels[None])[0])


def nll(S, trans: TransitionParams, gold, pad_mask=None) -> float:
    """``log Z - score(gold)`` over the non-padded slots."""
    S_real, k = _real_slots(S, pad_mask)
    _check_finite(S_real, trans.T, trans.start)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (len(S),):
        raise ValueError(f"expected {len(S)} gold labels, got {gold.shape}")
    sequence_score(S_real, trans, gold[k:])  # validates the labels
    return float(nll_and_grads_batch(S_real[None], trans, gold[None, k:])[0][0])


def marginals(S, trans: TransitionParams):
    """Unary ``(L, C)`` and pairwise ``(L-1, C, C)`` posterior marginals."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or len(S) < 1:
        raise ValueError("scores must be an L x C matrix with L >= 1")
    _check_finite(S, trans.T, trans.start)
    _, unary, pairwise = marginals_batch(S[None], trans)
    return unary[0], pairwise[0]


def crf_backward(S, trans: TransitionParams, gold, pad_mask=None):
    """Gradients of :func:`nll` w.r.t. ``S``, ``T`` and ``start``.

    Expected minus observed sufficient statistics; padded slots get zero.
    """
    S_arr = np.asarray(S, dtype=np.float64)
    S_real, k = _real_slots(S_arr, pad_mask)
    _check_finite(S_real, trans.T, trans.start)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (len(S_arr),):
        raise ValueError(f"expected {len(S_arr)} gold labels, got {gold.shape}")
    _, dS_real, dT, dstart = nll_and_grads_batch(S_real[None], trans, gold[None, k:])
    dS = np.zeros_like(S_arr)
    dS[k:] = dS_real[0]
    return dS, dT, dstart


def viterbi(S, trans: TransitionParams) -> tuple[list[int], float]:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or len(S) < 1:
        raise ValueError("scores must be an L x C matrix with L >= 1")
    _check_finite(S, trans.T, trans.start)
    paths, scores = viterbi_batch(S[None], trans)
    return paths[0].tolist(), float(scores[0])


# ---------------------------------------------------------------------------
# softmax baseline head


def log_softmax(s: np.ndarray) -> np.ndarray:
    return s - _logsumexp(s, axis=-1)[..., None]


def softmax_baseline(p, proj: ScoreProjection, gold: int | None = None):
    """Cross-entropy of ``softmax(W p + b)`` against ``gold`` and the argmax label.

    The loss is ``None`` when ``gold`` is ``None``.
    """
    s = project_scores([p], proj)[0]
    pred = int(np.argmax(s))
    if gold is None:
        return None, pred
    return float(-log_softmax(s)[gold]), pred


def softmax_grads(scores: np.ndarray, gold: np.ndarray):
    """Per-row cross-entropy and its gradient w.r.t. ``(B, C)`` scores."""
    logp = log_softmax(scores)
    rows = np.arange(len(gold))
    loss = -logp[rows, gold]
    d = np.exp(logp)
    d[rows, gold] -= 1.0
    return loss, d
