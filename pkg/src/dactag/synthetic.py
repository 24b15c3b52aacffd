"""Synthetic dialog corpora with controllable label structure and token cues.

Used by the tests, the acceptance suite and the demos as desk-scale stand-ins
for licensed DA corpora.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .corpus import Conversation, Utterance

PUNCT_MARKS = ("?", ".", "!", "...")


def _fillers(n: int) -> list[str]:
    return [f"w{i}" for i in range(n)]


def _cues(n_labels: int, synonyms: int) -> list[list[str]]:
    return [[f"cue{k}_{j}" for j in range(synonyms)] for k in range(n_labels)]


def label_names(n_labels: int) -> list[str]:
    return [f"L{k}" for k in range(n_labels)]


def cycle_corpus(
    n_conversations: int = 200,
    length: int = 20,
    n_labels: int = 4,
    noise: float = 0.2,
    seed: int = 0,
    cue_synonyms: int = 3,
    n_fillers: int = 40,
    fillers_per_utt: int = 3,
) -> list[Conversation]:
    """Conversations whose labels cycle ``L0 -> L1 -> ... -> L0``.

    The first label of each conversation is uniform. Every utterance holds
    one cue word for its label plus filler words; with probability ``noise``
    the cue word is replaced by a filler, leaving the utterance on its own
    uninformative.
    """
    rng = np.random.default_rng(seed)
    names = label_names(n_labels)
    cues = _cues(n_labels, cue_synonyms)
    fillers = _fillers(n_fillers)
    convs = []
    for c in range(n_conversations):
        y = int(rng.integers(n_labels))
        utts = []
        for t in range(length):
            if t:
                y = (y + 1) % n_labels
            toks = [fillers[i] for i in rng.integers(n_fillers, size=fillers_per_utt)]
            if rng.random() < noise:
                cue = fillers[int(rng.integers(n_fillers))]
            else:
                cue = cues[y][int(rng.integers(cue_synonyms))]
            toks.insert(int(rng.integers(len(toks) + 1)), cue)
            utts.append(Utterance("AB"[t % 2], tuple(toks), names[y], " ".join(toks)))
        convs.append(Conversation(f"conv{c:04d}", tuple(utts)))
    return convs


def punctuation_corpus(
    n_conversations: int = 100,
    length: int = 10,
    n_labels: int = 4,
    word_cue_rate: float = 0.5,
    seed: int = 0,
    n_fillers: int = 30,
    fillers_per_utt: int = 3,
) -> list[Conversation]:
    """Independent labels whose strong cue is a closing punctuation mark.

    Label ``k`` always ends with ``PUNCT_MARKS[k]`` (half the time as its own
    token, half attached to the last word). A weaker word cue for the true
    label appears with probability ``word_cue_rate``, otherwise a random
    label's word cue appears.
    """
    if n_labels > len(PUNCT_MARKS):
        raise ValueError(f"at most {len(PUNCT_MARKS)} labels")
    rng = np.random.default_rng(seed)
    names = label_names(n_labels)
    cues = _cues(n_labels, 1)
    fillers = _fillers(n_fillers)
    convs = []
    for c in range(n_conversations):
        utts = []
        for t in range(length):
            y = int(rng.integers(n_labels))
            cue_label = y if rng.random() < word_cue_rate else int(rng.integers(n_labels))
            toks = [fillers[i] for i in rng.integers(n_fillers, size=fillers_per_utt)]
            toks.insert(int(rng.integers(len(toks) + 1)), cues[cue_label][0])
            if rng.random() < 0.5:
                toks.append(PUNCT_MARKS[y])
            else:
                toks[-1] = toks[-1] + PUNCT_MARKS[y]
            utts.append(Utterance("AB"[t % 2], tuple(toks), names[y], " ".join(toks)))
        convs.append(Conversation(f"conv{c:04d}", tuple(utts)))
    return convs


def corrupt_tokens(convs: list[Conversation], fraction: float = 0.3, seed: int = 0) -> list[Conversation]:
    """Systematically permute a ``fraction`` of the token types.

    A random subset of types is cyclically relabelled among itself and the
    same substitution is applied everywhere, so every affected type is
    consistently rendered as another type of the subset, like a recognizer
    that keeps confusing the same words.
    """
    types = sorted({tok for c in convs for u in c.utterances for tok in u.tokens})
    rng = np.random.default_rng(seed)
    k = int(round(fraction * len(types)))
    if k < 2:
        return list(convs)
    chosen = [types[i] for i in rng.choice(len(types), size=k, replace=False)]
    mapping = {a: b for a, b in zip(chosen, chosen[1:] + chosen[:1])}
    return [
        replace(
            c,
            utterances=tuple(
                replace(u, tokens=tuple(mapping.get(t, t) for t in u.tokens)) for u in c.utterances
            ),
        )
        for c in convs
    ]


def split_ids(convs: list[Conversation], fractions=(0.8, 0.1, 0.1)) -> dict[str, str]:
    """Assign conversations to train/valid/test in file order."""
    n = len(convs)
    n_train = int(round(fractions[0] * n))
    n_valid = int(round(fractions[1] * n))
    spec = {}
    for i, c in enumerate(convs):
        spec[c.id] = "train" if i < n_train else "valid" if i < n_train + n_valid else "test"
    return spec
