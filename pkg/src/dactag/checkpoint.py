"""Versioned single-file binary checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic  b"DACTCKPT"
    u32       format version (1)
    u32       header length H
    H bytes   UTF-8 JSON header, keys sorted
    ...       float64 little-endian parameter arrays, C order, in the
              order listed by header["params"]

The header holds the dimension block (vocabulary size, embedding dim,
label count, pooled dim), the parameter manifest (name and shape), the
vocabulary tokens, label names, training config, head type, best epoch,
validation accuracy and seed. The first parameter is always
``"embedding"``; the rest follow ``DialogActModel.dense_params`` order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .corpus import LabelSet, Vocabulary
from .crf import ScoreProjection, TransitionParams
from .embedding import EmbeddingTable
from .encoder import ConvFilterBank
from .model import DialogActModel

MAGIC = b"DACTCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: DialogActModel
    vocab: Vocabulary
    labels: LabelSet
    config: TrainConfig
    epoch: int = 0
    valid_accuracy: float = float("nan")
    seed: int = 0

    def to_bytes(self) -> bytes:
        m = self.model
        params = {"embedding": m.table.matrix, **m.dense_params()}
        header = {
            "dims": {
                "vocab_size": len(self.vocab),
                "embedding_dim": m.table.dim,
                "n_labels": m.n_labels,
                "p_dim": m.bank.output_dim,
            },
            "params": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
            "widths": list(m.bank.widths),
            "head": m.head,
            "vocab": self.vocab.tokens,
            "labels": list(self.labels.names),
            "config": self.config.to_dict(),
            "epoch": self.epoch,
            "valid_accuracy": None if np.isnan(self.valid_accuracy) else self.valid_accuracy,
            "seed": self.seed,
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        body = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in params.values())
        return MAGIC + struct.pack("<II", VERSION, len(hbytes)) + hbytes + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:8] != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic bytes)")
        version, hlen = struct.unpack("<II", data[8:16])
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
        offset = 16 + hlen
        arrays = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) * 8
            if offset + n > len(data):
                raise CheckpointError(f"truncated checkpoint while reading {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(data, dtype="<f8", count=n // 8, offset=offset).reshape(shape).astype(np.float64)
            offset += n
        if offset != len(data):
            raise CheckpointError("trailing bytes after the declared parameters")

        widths = header["widths"]
        bank = ConvFilterBank(
            widths,
            [arrays[f"conv{w}.filters"] for w in widths],
            [arrays[f"conv{w}.bias"] for w in widths],
        )
        model = DialogActModel(
            EmbeddingTable(arrays["embedding"]),
            bank,
            ScoreProjection(arrays["proj.W"], arrays["proj.b"]),
            TransitionParams(arrays["crf.T"], arrays["crf.start"]),
            header["head"],
        )
        acc = header["valid_accuracy"]
        return cls(
            model,
            Vocabulary(list(header["vocab"])),
            LabelSet(tuple(header["labels"])),
            TrainConfig.from_dict(header["config"]),
            header["epoch"],
            float("nan") if acc is None else acc,
            header["seed"],
        )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(ckpt.to_bytes())


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_bytes(Path(path).read_bytes())
