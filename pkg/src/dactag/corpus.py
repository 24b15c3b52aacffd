"""Corpus ingestion, vocabularies, punctuation stripping and context windows.

Corpus files are JSON lines, one utterance per line::

    {"conversation_id": "Bed003", "speaker": "A", "text": "okay .", "label": "s"}

``tokens`` (a list) may replace ``text``; ``label`` may be omitted for
prediction input. Records of one conversation must be contiguous and in
dialog order. A split file maps each conversation id to ``train``,
``valid`` or ``test``, either as JSON (``{"Bed003": "train"}``) or as
whitespace-separated ``<conversation_id> <split>`` lines.

Transcript variants (manual, hybrid ASR, end-to-end ASR) are distinct corpus
files that share conversation ids and therefore one split file.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
# Label index stored for synthetic padding slots and unlabeled utterances.
NO_LABEL = -1

SPLITS = ("train", "valid", "test")
ASCII_PUNCT = set(".,!?;:\"'()-")


class CorpusFormatError(ValueError):
    """Malformed corpus or split file."""


@dataclass(frozen=True)
class Utterance:
    speaker: str
    tokens: tuple[str, ...]
    label: str | None = None
    raw_text: str = ""

    @property
    def empty(self) -> bool:
        return len(self.tokens) == 0


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]
    # Split this conversation was loaded into, if any.
    split: str | None = None

    def __post_init__(self):
        if not self.utterances:
            raise CorpusFormatError(f"conversation {self.id!r} has no utterances")

    def __len__(self) -> int:
        return len(self.utterances)

    def labels(self) -> list[str | None]:
        return [u.label for u in self.utterances]


@dataclass(frozen=True)
class LabelSet:
    """Ordered DA tag names with a name <-> index bijection."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate label names in {self.names}")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.names)})

    @classmethod
    def from_labels(cls, labels: Iterable[str | None]) -> "LabelSet":
        # Sorted so that transcript variants of one corpus agree on indices.
        return cls(tuple(sorted({lab for lab in labels if lab is not None})))

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None

    def name(self, idx: int) -> str:
        return self.names[idx]


@dataclass
class Vocabulary:
    """Token to id map with PAD=0 and UNK=1 reserved."""

    tokens: list[str] = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])

    def __post_init__(self):
        if self.tokens[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError("vocabulary must start with the PAD and UNK entries")
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def add(self, token: str) -> int:
        if token not in self._ids:
            self._ids[token] = len(self.tokens)
            self.tokens.append(token)
        return self._ids[token]

    def id(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._ids.get(tok, UNK) for tok in tokens]


@dataclass
class CorpusSplit:
    train: list[Conversation]
    valid: list[Conversation]
    test: list[Conversation]
    labels: LabelSet

    def __getitem__(self, split: str) -> list[Conversation]:
        if split not in SPLITS:
            raise KeyError(f"unknown split {split!r}")
        return getattr(self, split)

    def counts(self) -> dict[str, int]:
        """Utterance count per split."""
        return {s: sum(len(c) for c in self[s]) for s in SPLITS}

    def map(self, fn) -> "CorpusSplit":
        """Apply ``fn`` to every utterance, keeping the label set."""
        return CorpusSplit(
            *(
                [replace(c, utterances=tuple(fn(u) for u in c.utterances)) for c in self[s]]
                for s in SPLITS
            ),
            labels=self.labels,
        )


@dataclass(frozen=True)
class ContextWindow:
    """The current utterance plus ``n`` preceding ones, oldest first.

    ``grids`` has shape ``(n + 1, max_len)``; padding slots are all PAD and
    carry ``NO_LABEL`` in ``gold_labels``.
    """

    grids: np.ndarray
    gold_labels: np.ndarray
    pad_mask: np.ndarray
    source: tuple[str, int]

    @property
    def context(self) -> int:
        return len(self.grids) - 1

    @property
    def n_padded(self) -> int:
        return int(self.pad_mask.sum())

    @property
    def current_label(self) -> int:
        return int(self.gold_labels[-1])


# ---------------------------------------------------------------------------
# preprocessing


def _is_punct_char(ch: str) -> bool:
    return ch in ASCII_PUNCT or unicodedata.category(ch).startswith("P")


def strip_token(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punct_char(token[start]):
        start += 1
    while end > start and _is_punct_char(token[end - 1]):
        end -= 1
    return token[start:end]


def strip_punctuation(u: Utterance) -> Utterance:
    """Drop punctuation-only tokens and trim punctuation off word edges.

    Inner punctuation ("don't", "u.s") is kept. The result may be empty.
    """
    tokens = tuple(t for t in (strip_token(tok) for tok in u.tokens) if t)
    return replace(u, tokens=tokens)


def lowercase(u: Utterance) -> Utterance:
    return replace(u, tokens=tuple(t.lower() for t in u.tokens))


# ---------------------------------------------------------------------------
# loading


def _parse_record(line: str, lineno: int, path) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise CorpusFormatError(f"{path}:{lineno}: record must be a JSON object")
    for key in ("conversation_id", "speaker"):
        if not isinstance(rec.get(key), str):
            raise CorpusFormatError(f"{path}:{lineno}: missing or non-string field {key!r}")
    if "tokens" in rec:
        toks = rec["tokens"]
        if not isinstance(toks, list) or not all(isinstance(t, str) for t in toks):
            raise CorpusFormatError(f"{path}:{lineno}: 'tokens' must be a list of strings")
    elif not isinstance(rec.get("text"), str):
        raise CorpusFormatError(f"{path}:{lineno}: record needs 'text' or 'tokens'")
    label = rec.get("label")
    if label is not None and not isinstance(label, str):
        raise CorpusFormatError(f"{path}:{lineno}: 'label' must be a string")
    return rec


def read_conversations(path, lowercase_tokens: bool = True, strip_punct: bool = False) -> list[Conversation]:
    """Read a corpus file into conversations, in file order."""
    path = Path(path)
    convs: list[Conversation] = []
    seen: set[str] = set()
    cur_id, cur_utts = None, []

    def flush():
        if cur_id is not None:
            convs.append(Conversation(cur_id, tuple(cur_utts)))

    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = _parse_record(line, lineno, path)
            cid = rec["conversation_id"]
            if cid != cur_id:
                if cid in seen:
                    raise CorpusFormatError(
                        f"{path}:{lineno}: records of conversation {cid!r} are not contiguous"
                    )
                flush()
                seen.add(cid)
                cur_id, cur_utts = cid, []
            if "tokens" in rec:
                tokens, raw = tuple(rec["tokens"]), rec.get("text", " ".join(rec["tokens"]))
            else:
                raw = rec["text"]
                tokens = tuple(raw.split())
            u = Utterance(rec["speaker"], tokens, rec.get("label"), raw)
            if lowercase_tokens:
                u = lowercase(u)
            if strip_punct:
                u = strip_punctuation(u)
            cur_utts.append(u)
    flush()
    return convs


def write_conversations(convs: Iterable[Conversation], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in convs:
            for u in c.utterances:
                rec = {"conversation_id": c.id, "speaker": u.speaker, "tokens": list(u.tokens)}
                if u.label is not None:
                    rec["label"] = u.label
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_split_spec(path) -> dict[str, str]:
    """Load a conversation id -> split mapping (JSON object or two-column text)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(mapping, dict):
            raise CorpusFormatError(f"{path}: split spec must be a JSON object")
        items = [(k, v, None) for k, v in mapping.items()]
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CorpusFormatError(f"{path}:{lineno}: expected '<conversation_id> <split>'")
            items.append((parts[0], parts[1], lineno))
    spec = {}
    for cid, split, lineno in items:
        if split not in SPLITS:
            where = f"{path}:{lineno}" if lineno else str(path)
            raise CorpusFormatError(f"{where}: unknown split name {split!r} for {cid!r}")
        spec[cid] = split
    return spec


def split_conversations(convs: Iterable[Conversation], split_spec: Mapping[str, str], source="corpus") -> CorpusSplit:
    """Partition conversations by id and register every label into one LabelSet.

    Conversations absent from the split spec are dropped with a warning.
    """
    for cid, split in split_spec.items():
        if split not in SPLITS:
            raise CorpusFormatError(f"unknown split name {split!r} for {cid!r}")
    parts: dict[str, list[Conversation]] = {s: [] for s in SPLITS}
    dropped = 0
    for conv in convs:
        split = split_spec.get(conv.id)
        if split is None:
            dropped += 1
            continue
        parts[split].append(replace(conv, split=split))
    if dropped:
        logger.warning("%s: %d conversations not in the split spec were skipped", source, dropped)

    seen = {s: {u.label for c in parts[s] for u in c.utterances} - {None} for s in SPLITS}
    test_only = sorted(seen["test"] - seen["train"] - seen["valid"])
    if test_only and (parts["train"] or parts["valid"]):
        raise CorpusFormatError(f"{source}: labels only present in the test split: {test_only}")

    labels = LabelSet.from_labels(seen["train"] | seen["valid"] | seen["test"])
    corpus = CorpusSplit(parts["train"], parts["valid"], parts["test"], labels)
    counts = corpus.counts()
    logger.info(
        "%s: train/valid/test utterances %d/%d/%d, %d labels",
        source, counts["train"], counts["valid"], counts["test"], len(labels),
    )
    return corpus


def load_corpus(
    path,
    split_spec: Mapping[str, str] | str | Path,
    lowercase_tokens: bool = True,
    strip_punct: bool = False,
) -> CorpusSplit:
    """Read a corpus file and partition its conversations by ``split_spec``."""
    if not isinstance(split_spec, Mapping):
        split_spec = read_split_spec(split_spec)
    convs = read_conversations(path, lowercase_tokens, strip_punct)
    return split_conversations(convs, split_spec, source=str(path))


def write_split_spec(split_spec: Mapping[str, str], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for cid, split in split_spec.items():
            fh.write(f"{cid} {split}\n")


# ---------------------------------------------------------------------------
# vocabulary and windows


def build_vocab(train_conversations: Iterable[Conversation], min_freq: int = 1) -> Vocabulary:
    """Vocabulary over training tokens seen at least ``min_freq`` times.

    Ids follow first occurrence. Conversations tagged with another split
    are rejected so evaluation data can never leak into the vocabulary.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    convs = list(train_conversations)
    if not convs:
        raise ValueError("cannot build a vocabulary from an empty training set")
    for c in convs:
        if c.split not in (None, "train"):
            raise ValueError(f"conversation {c.id!r} belongs to the {c.split} split, not train")
    counts = Counter(tok for c in convs for u in c.utterances for tok in u.tokens)
    vocab = Vocabulary()
    for c in convs:
        for u in c.utterances:
            for tok in u.tokens:
                if counts[tok] >= min_freq:
                    vocab.add(tok)
    return vocab


def make_windows(
    c: Conversation,
    n: int,
    vocab: Vocabulary,
    max_len: int = 100,
    labels: LabelSet | None = None,
) -> list[ContextWindow]:
    """One window per utterance of ``c``; slot ``n`` is the current utterance.

    Positions ``t < n`` get ``n - t`` leading all-PAD slots. Token grids are
    right-truncated / right-padded to ``max_len``. Without ``labels`` every
    gold entry is ``NO_LABEL``.
    """
    if n < 0:
        raise ValueError("context length must be >= 0")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    T = len(c.utterances)
    grids = np.zeros((T, max_len), dtype=np.int64)
    golds = np.full(T, NO_LABEL, dtype=np.int64)
    for t, u in enumerate(c.utterances):
        ids = vocab.encode(u.tokens[:max_len])
        grids[t, : len(ids)] = ids
        if labels is not None and u.label is not None:
            golds[t] = labels.index(u.label)

    windows = []
    for t in range(T):
        pad = max(0, n - t)
        lo = t - n + pad
        g = np.zeros((n + 1, max_len), dtype=np.int64)
        g[pad:] = grids[lo : t + 1]
        y = np.full(n + 1, NO_LABEL, dtype=np.int64)
        y[pad:] = golds[lo : t + 1]
        mask = np.zeros(n + 1, dtype=bool)
        mask[:pad] = True
        windows.append(ContextWindow(g, y, mask, (c.id, t)))
    return windows


def corpus_windows(convs, n, vocab, max_len=100, labels=None) -> list[ContextWindow]:
    return [w for c in convs for w in make_windows(c, n, vocab, max_len, labels)]
