"""Accuracy metrics, the majority-class baseline and the train x test variant matrix."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import Checkpoint
from .config import ConfigError, TrainConfig
from .corpus import CorpusSplit, corpus_windows, load_corpus, read_split_spec
from .model import WindowBatch
from .trainer import fit

logger = logging.getLogger(__name__)


def accuracy(preds: Sequence, golds: Sequence) -> float:
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(golds)} golds")
    if len(golds) == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def majority_baseline(train_labels: Sequence, test_labels: Sequence) -> float:
    """Accuracy of always predicting the most frequent training label.

    Frequency ties go to the label seen first in ``train_labels``.
    """
    if not train_labels or not test_labels:
        raise ValueError("majority baseline needs non-empty train and test labels")
    majority = Counter(train_labels).most_common(1)[0][0]
    return accuracy([majority] * len(test_labels), list(test_labels))


@dataclass
class EvalReport:
    labels: tuple[str, ...]
    confusion: np.ndarray  # rows gold, columns predicted
    seed_results: list[tuple[int, float]] = field(default_factory=list)

    @property
    def n_utterances(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    @property
    def precision(self) -> np.ndarray:
        col = self.confusion.sum(axis=0)
        return np.divide(np.diag(self.confusion), col, out=np.zeros(len(col)), where=col > 0)

    @property
    def recall(self) -> np.ndarray:
        row = self.confusion.sum(axis=1)
        return np.divide(np.diag(self.confusion), row, out=np.zeros(len(row)), where=row > 0)

    @property
    def f1(self) -> np.ndarray:
        p, r = self.precision, self.recall
        return np.divide(2 * p * r, p + r, out=np.zeros(len(p)), where=(p + r) > 0)

    @property
    def summary(self) -> dict:
        """avg/min/max over seeds (falls back to the pooled accuracy)."""
        accs = [a for _, a in self.seed_results] or [self.accuracy]
        return {"avg": float(np.mean(accs)), "min": float(min(accs)), "max": float(max(accs))}

    def cell(self) -> str:
        s = self.summary
        return f"{100 * s['avg']:.1f} ({100 * s['min']:.1f}, {100 * s['max']:.1f})"

    def to_record(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n_utterances": self.n_utterances,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "seeds": [{"seed": s, "accuracy": a} for s, a in self.seed_results],
            "summary": self.summary,
        }

    def render(self) -> str:
        width = max(8, *(len(n) for n in self.labels))
        lines = [
            f"accuracy {100 * self.accuracy:.2f}% over {self.n_utterances} utterances",
            f"{'label':<{width}} {'prec':>6} {'rec':>6} {'f1':>6} {'n':>7}",
        ]
        support = self.confusion.sum(axis=1)
        for i, name in enumerate(self.labels):
            lines.append(
                f"{name:<{width}} {self.precision[i]:6.3f} {self.recall[i]:6.3f} {self.f1[i]:6.3f} {support[i]:7d}"
            )
        if len(self.seed_results) > 1:
            lines.append(f"seeds: {self.cell()}")
        return "\n".join(lines)


def merge_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool confusion counts and concatenate per-seed results."""
    if not reports:
        raise ValueError("no reports to merge")
    conf = sum(r.confusion for r in reports)
    seeds = [s for r in reports for s in r.seed_results]
    return EvalReport(reports[0].labels, conf, seeds)


def evaluate(ckpt: Checkpoint, corpus: CorpusSplit, split: str = "test") -> EvalReport:
    """Score ``ckpt`` on one split of a corpus variant.

    Windows are built with the checkpoint's context length and vocabulary;
    unseen tokens map to UNK. The checkpoint is never modified.
    """
    if set(corpus.labels.names) != set(ckpt.labels.names):
        raise ValueError(
            f"label set mismatch: checkpoint {list(ckpt.labels.names)} vs corpus {list(corpus.labels.names)}"
        )
    convs = corpus[split]
    if not convs:
        raise ValueError(f"the {split} split is empty")
    for c in convs:
        if any(u.label is None for u in c.utterances):
            raise ValueError(f"conversation {c.id!r} has unlabeled utterances")
    cfg = ckpt.config
    batch = WindowBatch.from_windows(corpus_windows(convs, cfg.context, ckpt.vocab, cfg.max_len, ckpt.labels))
    pred = ckpt.model.predict(batch)
    gold = batch.gold[:, -1]
    C = len(ckpt.labels)
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (gold, pred), 1)
    report = EvalReport(ckpt.labels.names, conf)
    report.seed_results.append((ckpt.seed, report.accuracy))
    return report


# ---------------------------------------------------------------------------
# experiment matrix


@dataclass
class VariantSpec:
    """One transcript variant: a corpus file (or an in-memory corpus) plus preprocessing."""

    name: str
    path: str | None = None
    strip_punct: bool = False
    lowercase: bool = True
    corpus: CorpusSplit | None = None

    def load(self, split_spec) -> CorpusSplit:
        if self.corpus is not None:
            return self.corpus
        if self.path is None:
            raise ConfigError(f"variant {self.name!r} has neither a path nor a corpus")
        return load_corpus(self.path, split_spec, self.lowercase, self.strip_punct)


@dataclass
class MatrixSpec:
    train_variants: list[VariantSpec]
    test_variants: list[VariantSpec]
    config: TrainConfig = field(default_factory=TrainConfig)
    split_spec: dict | str | None = None
    embeddings: str | None = None

    @classmethod
    def from_file(cls, path, root=None) -> "MatrixSpec":
        """Parse a JSON matrix spec.

        Relative paths resolve against ``root``, defaulting to the spec's directory.
        """
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        allowed = {"train", "test", "config", "split", "embeddings"}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ConfigError(f"unknown matrix spec keys: {unknown}")
        base = Path(root) if root is not None else path.parent

        def resolve(p):
            return None if p is None else str(base / p)

        def variants(key):
            out = []
            for name, v in raw.get(key, {}).items():
                if isinstance(v, str):
                    v = {"path": v}
                extra = sorted(set(v) - {"path", "strip_punct", "lowercase"})
                if extra:
                    raise ConfigError(f"unknown keys for variant {name!r}: {extra}")
                if "path" not in v:
                    raise ConfigError(f"variant {name!r}: path required")
                out.append(VariantSpec(name, resolve(v.get("path")), v.get("strip_punct", False), v.get("lowercase", True)))
            return out

        if "split" not in raw:
            raise ConfigError("matrix spec needs a 'split' file")
        return cls(
            variants("train"),
            variants("test"),
            TrainConfig.from_dict(raw.get("config", {})),
            resolve(raw["split"]),
            resolve(raw.get("embeddings")),
        )


@dataclass
class MatrixResult:
    train_names: list[str]
    test_names: list[str]
    cells: dict[tuple[str, str], EvalReport]

    def __getitem__(self, key: tuple[str, str]) -> EvalReport:
        return self.cells[key]

    def render(self) -> str:
        """Rows are test variants, columns train variants; cells ``avg (min, max)`` in %."""
        head = ["test \\ train"] + self.train_names
        rows = [[t] + [self.cells[(tr, t)].cell() for tr in self.train_names] for t in self.test_names]
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]

        def fmt(r):
            return " | ".join(c.ljust(w) for c, w in zip(r, widths))

        return "\n".join([fmt(head), "-+-".join("-" * w for w in widths)] + [fmt(r) for r in rows])

    def records(self) -> list[dict]:
        return [
            {"train": tr, "test": te, **self.cells[(tr, te)].to_record()}
            for tr in self.train_names
            for te in self.test_names
        ]


class MatrixCellError(RuntimeError):
    pass


def run_matrix(spec: MatrixSpec) -> MatrixResult:
    """Fit each train variant once per seed and evaluate every test variant.

    Each cell pools the per-seed best checkpoints' results on the test split.
    """
    if not spec.train_variants or not spec.test_variants:
        raise ValueError("matrix needs at least one train and one test variant")
    split_spec = spec.split_spec
    if isinstance(split_spec, (str, Path)):
        split_spec = read_split_spec(split_spec)
    tests = {v.name: v.load(split_spec) for v in spec.test_variants}
    cells = {}
    for tv in spec.train_variants:
        try:
            result = fit(tv.load(split_spec), spec.config, spec.embeddings)
        except Exception as exc:
            raise MatrixCellError(f"training on variant {tv.name!r} failed: {exc}") from exc
        for name, corpus in tests.items():
            try:
                cells[(tv.name, name)] = merge_reports([evaluate(c, corpus) for c in result.checkpoints])
            except Exception as exc:
                raise MatrixCellError(f"cell (train={tv.name!r}, test={name!r}) failed: {exc}") from exc
            logger.info("train=%s test=%s: %s", tv.name, name, cells[(tv.name, name)].cell())
    return MatrixResult([v.name for v in spec.train_variants], [v.name for v in spec.test_variants], cells)
