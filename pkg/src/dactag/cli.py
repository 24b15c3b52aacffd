"""``dactag`` command line: preprocess, train, evaluate, predict, matrix.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
Relative data paths in config files resolve against ``$DACTAG_DATA_ROOT``
when set, otherwise against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import TRAIN_FIELDS, ConfigError, TrainConfig
from .corpus import (
    CorpusFormatError,
    corpus_windows,
    load_corpus,
    read_conversations,
    split_conversations,
    write_conversations,
)
from .evaluation import MatrixCellError, MatrixSpec, evaluate, run_matrix
from .model import WindowBatch
from .optim import NumericalError
from .trainer import fit

logger = logging.getLogger("dactag")

DATA_ROOT_ENV = "DACTAG_DATA_ROOT"
RUN_FIELDS = frozenset({"corpus", "split", "embeddings", "out"})


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None


def _root_for(config_path: Path | None) -> Path:
    env = os.environ.get(DATA_ROOT_ENV)
    if env:
        return Path(env)
    return config_path.parent if config_path is not None else Path.cwd()


def _resolve(p, root: Path) -> str:
    p = Path(p)
    return str(p if p.is_absolute() else root / p)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


# ---------------------------------------------------------------------------
# run config


def load_run_config(path=None, overrides: dict | None = None) -> dict:
    """Merge a JSON run config with flag overrides and validate it.

    Returns ``{"corpus", "split", "embeddings", "out", "train": TrainConfig}``
    with paths resolved. Unknown keys and missing inputs raise ConfigError.
    """
    raw = {}
    cfg_path = None
    if path is not None:
        cfg_path = Path(path)
        try:
            raw = json.loads(cfg_path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {cfg_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - RUN_FIELDS - TRAIN_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    root = _root_for(cfg_path)
    run = {}
    for key in ("corpus", "split"):
        if key not in raw:
            raise ConfigError(f"{key}: required")
        run[key] = _resolve(raw[key], root)
    run["embeddings"] = _resolve(raw["embeddings"], root) if raw.get("embeddings") else None
    run["out"] = str(raw.get("out", "runs"))
    for key in ("corpus", "split", "embeddings"):
        if run[key] is not None and not Path(run[key]).is_file():
            raise ConfigError(f"{key}: file not found: {run[key]}")
    run["train"] = TrainConfig.from_dict({k: v for k, v in raw.items() if k in TRAIN_FIELDS})
    return run


def effective_config(run: dict) -> dict:
    """Flat config dict that re-parses to the same run."""
    out = {k: run[k] for k in ("corpus", "split", "embeddings", "out") if run[k] is not None}
    out.update(run["train"].to_dict())
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_preprocess(args) -> int:
    before = read_conversations(args.input, lowercase_tokens=False)
    after = read_conversations(args.input, lowercase_tokens=args.lowercase, strip_punct=args.strip_punct)
    try:
        write_conversations(after, args.out)
    except OSError as exc:
        raise CorpusFormatError(f"cannot write {args.out}: {exc}") from None
    emptied = sum(
        1
        for cb, ca in zip(before, after)
        for ub, ua in zip(cb.utterances, ca.utterances)
        if ua.empty and not ub.empty
    )
    vocab_before = {t for c in before for u in c.utterances for t in u.tokens}
    vocab_after = {t for c in after for u in c.utterances for t in u.tokens}
    _emit(
        {
            "utterances": sum(len(c) for c in after),
            "conversations": len(after),
            "emptied_utterances": emptied,
            "vocab_before": len(vocab_before),
            "vocab_after": len(vocab_after),
            "vocab_delta": len(vocab_after) - len(vocab_before),
        }
    )
    return 0


def cmd_train(args) -> int:
    run = load_run_config(
        args.config,
        {"seeds": args.seed, "context": args.context, "out": args.out},
    )
    cfg: TrainConfig = run["train"]
    _emit(effective_config(run))
    corpus = load_corpus(run["corpus"], run["split"], cfg.lowercase, cfg.strip_punct)
    result = fit(corpus, cfg, run["embeddings"])
    out = Path(run["out"])
    out.mkdir(parents=True, exist_ok=True)
    for r in result.runs:
        save_checkpoint(r.checkpoint, out / f"seed{r.seed}.ckpt")
    with (out / "train_log.jsonl").open("w", encoding="utf-8") as fh:
        for rec in result.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(effective_config(run), sort_keys=True, indent=2) + "\n")
    best = result.best
    print(
        f"best seed {best.seed}: valid accuracy {100 * best.valid_accuracy:.2f}% "
        f"(epoch {best.epoch}); seeds avg/min/max {result.summary()}"
    )
    return 0


def _load_variant(args, ckpt):
    lower = ckpt.config.lowercase if args.lowercase is None else args.lowercase
    if args.split_spec:
        return load_corpus(args.corpus, args.split_spec, lower, args.strip_punct), args.split
    convs = read_conversations(args.corpus, lower, args.strip_punct)
    return split_conversations(convs, {c.id: "test" for c in convs}, str(args.corpus)), "test"


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    corpus, split = _load_variant(args, ckpt)
    report = evaluate(ckpt, corpus, split)
    print(report.render())
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"checkpoint": str(args.checkpoint), "corpus": str(args.corpus), **report.to_record()}, sort_keys=True) + "\n")
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    lower = ckpt.config.lowercase if args.lowercase is None else args.lowercase
    convs = read_conversations(args.corpus, lower, args.strip_punct)
    records = [json.loads(line) for line in Path(args.corpus).read_text(encoding="utf-8").splitlines() if line.strip()]
    preds = []
    if convs:
        cfg = ckpt.config
        windows = corpus_windows(convs, cfg.context, ckpt.vocab, cfg.max_len)
        preds = ckpt.model.predict(WindowBatch.from_windows(windows)).tolist()
    if len(preds) != len(records):
        raise CorpusFormatError("record count changed while reading the corpus")
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for rec, p in zip(records, preds):
            rec["label"] = ckpt.labels.name(p)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"labelled {len(records)} utterances in {len(convs)} conversations -> {args.out}")
    return 0


def cmd_matrix(args) -> int:
    root = Path(os.environ[DATA_ROOT_ENV]) if os.environ.get(DATA_ROOT_ENV) else None
    spec = MatrixSpec.from_file(args.spec, root=root)
    overrides = {k: v for k, v in {"seeds": args.seed, "context": args.context}.items() if v is not None}
    if overrides:
        spec.config = TrainConfig.from_dict({**spec.config.to_dict(), **overrides})
    for v in spec.train_variants + spec.test_variants:
        if not Path(v.path).is_file():
            raise ConfigError(f"variant {v.name!r}: file not found: {v.path}")
    if not Path(spec.split_spec).is_file():
        raise ConfigError(f"split: file not found: {spec.split_spec}")
    _emit(spec.config.to_dict())
    result = run_matrix(spec)
    table = result.render()
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "matrix.txt").write_text(table + "\n", encoding="utf-8")
        with (out / "matrix.jsonl").open("w", encoding="utf-8") as fh:
            for rec in result.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dactag", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="lowercase / strip punctuation from a corpus file")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--strip-punct", action="store_true")
    p.add_argument("--lowercase", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit one model per seed")
    p.add_argument("--config")
    p.add_argument("--seed", type=_seed_list)
    p.add_argument("--context", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("evaluate", cmd_evaluate, "score a checkpoint on a labelled corpus"),
        ("predict", cmd_predict, "fill in DA labels for a corpus"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("checkpoint")
        p.add_argument("corpus")
        p.add_argument("--strip-punct", action="store_true")
        p.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=None)
        p.set_defaults(func=func)
        if name == "evaluate":
            p.add_argument("--split-spec")
            p.add_argument("--split", default="test", choices=("train", "valid", "test"))
            p.add_argument("--out")
        else:
            p.add_argument("--out", required=True)

    p = sub.add_parser("matrix", help="train x test transcript-variant grid")
    p.add_argument("spec")
    p.add_argument("--seed", type=_seed_list)
    p.add_argument("--context", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"dactag: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"dactag: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"dactag: numerical failure: {exc}", file=sys.stderr)
        return 3
    except MatrixCellError as exc:
        code = 3 if isinstance(exc.__cause__, NumericalError) else 2
        print(f"dactag: {exc}", file=sys.stderr)
        return code
    except (CorpusFormatError, CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"dactag: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
