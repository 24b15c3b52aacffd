import json

import pytest

from dactag.checkpoint import load_checkpoint
from dactag.cli import load_run_config, main
from dactag.corpus import write_conversations, write_split_spec
from dactag.synthetic import cycle_corpus, punctuation_corpus, split_ids


def _toy_files(tmp_path, **cfg):
    convs = cycle_corpus(12, 6, n_labels=3, noise=0.0, seed=2)
    write_conversations(convs, tmp_path / "corpus.jsonl")
    write_split_spec(split_ids(convs), tmp_path / "split.txt")
    config = {
        "corpus": "corpus.jsonl",
        "split": "split.txt",
        "embedding_dim": 8,
        "filters_per_width": 3,
        "widths": [2, 3],
        "max_len": 6,
        "batch_size": 16,
        "optimizer": "adagrad",
        "learning_rate": 0.07,
        "max_epochs": 3,
        "seeds": [1],
        **cfg,
    }
    (tmp_path / "run.json").write_text(json.dumps(config))
    return tmp_path / "run.json"


def test_preprocess_strip_punct(tmp_path, capsys):
    rec = {"conversation_id": "c", "speaker": "A", "tokens": ["okay", "."], "label": "s"}
    (tmp_path / "in.jsonl").write_text(json.dumps(rec) + "\n")
    assert main(["preprocess", str(tmp_path / "in.jsonl"), "--out", str(tmp_path / "o.jsonl"), "--strip-punct"]) == 0
    assert json.loads((tmp_path / "o.jsonl").read_text())["tokens"] == ["okay"]


def test_preprocess_no_flags_identity(tmp_path, capsys):
    convs = cycle_corpus(3, 4, seed=0)
    write_conversations(convs, tmp_path / "in.jsonl")
    assert main(["preprocess", str(tmp_path / "in.jsonl"), "--out", str(tmp_path / "o.jsonl")]) == 0
    assert (tmp_path / "o.jsonl").read_bytes() == (tmp_path / "in.jsonl").read_bytes()


def test_preprocess_emptied_count(tmp_path, capsys):
    convs = punctuation_corpus(10, 6, seed=1)
    # make some utterances punctuation-only
    from dataclasses import replace

    convs[0] = replace(convs[0], utterances=tuple(replace(u, tokens=("?",)) for u in convs[0].utterances[:3]) + convs[0].utterances[3:])
    write_conversations(convs, tmp_path / "in.jsonl")
    assert main(["preprocess", str(tmp_path / "in.jsonl"), "--out", str(tmp_path / "o.jsonl"), "--strip-punct"]) == 0
    summary = json.loads(capsys.readouterr().out)
    oracle = 0
    for line in (tmp_path / "in.jsonl").read_text().splitlines():
        toks = json.loads(line)["tokens"]
        if toks and all(all(not ch.isalnum() for ch in t) for t in toks):
            oracle += 1
    assert summary["emptied_utterances"] == oracle == 3


def test_preprocess_unwritable(tmp_path, capsys):
    (tmp_path / "in.jsonl").write_text("")
    assert main(["preprocess", str(tmp_path / "in.jsonl"), "--out", str(tmp_path / "no" / "dir" / "o.jsonl")]) == 2


def test_train_writes_checkpoints_and_is_deterministic(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    assert main(["train", "--config", str(cfg), "--seed", "1,2", "--out", str(tmp_path / "r1")]) == 0
    assert main(["train", "--config", str(cfg), "--seed", "1,2", "--out", str(tmp_path / "r2")]) == 0
    for name in ("seed1.ckpt", "seed2.ckpt", "train_log.jsonl"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    load_checkpoint(tmp_path / "r1" / "seed1.ckpt")
    echoed = json.loads((tmp_path / "r1" / "config.json").read_text())
    again = load_run_config(None, echoed)
    assert again == load_run_config(cfg, {"seeds": (1, 2), "out": str(tmp_path / "r1")})


def test_train_config_errors(tmp_path, capsys):
    cfg = _toy_files(tmp_path, bogus_key=3)
    assert main(["train", "--config", str(cfg)]) == 1
    assert "bogus_key" in capsys.readouterr().err
    cfg = _toy_files(tmp_path, dropout=1.5)
    assert main(["train", "--config", str(cfg)]) == 1
    assert "dropout" in capsys.readouterr().err
    cfg = _toy_files(tmp_path, corpus="missing.jsonl")
    assert main(["train", "--config", str(cfg)]) == 1
    assert main(["train", "--nonsense"]) == 1


def test_data_root_env(tmp_path, monkeypatch, capsys):
    cfg = _toy_files(tmp_path)
    moved = tmp_path / "cfgdir"
    moved.mkdir()
    (moved / "run.json").write_text(cfg.read_text())
    monkeypatch.setenv("DACTAG_DATA_ROOT", str(tmp_path))
    run = load_run_config(moved / "run.json")
    assert run["corpus"] == str(tmp_path / "corpus.jsonl")


def test_evaluate_predict_roundtrip(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    ckpt = str(tmp_path / "r" / "seed1.ckpt")
    corpus = str(tmp_path / "corpus.jsonl")
    assert main(["evaluate", ckpt, corpus, "--out", str(tmp_path / "eval.jsonl")]) == 0
    acc = json.loads((tmp_path / "eval.jsonl").read_text())["accuracy"]

    # strip labels, predict, then score the predictions against the gold file
    gold = [json.loads(l) for l in (tmp_path / "corpus.jsonl").read_text().splitlines()]
    unlabeled = tmp_path / "unlabeled.jsonl"
    unlabeled.write_text("".join(json.dumps({k: v for k, v in r.items() if k != "label"}) + "\n" for r in gold))
    assert main(["predict", ckpt, str(unlabeled), "--out", str(tmp_path / "pred.jsonl")]) == 0
    pred = [json.loads(l) for l in (tmp_path / "pred.jsonl").read_text().splitlines()]
    assert [p["conversation_id"] for p in pred] == [g["conversation_id"] for g in gold]
    assert sum(p["label"] == g["label"] for p, g in zip(pred, gold)) / len(gold) == acc

    # predictions re-evaluated as a labelled corpus score 100% against themselves
    assert main(["evaluate", ckpt, str(tmp_path / "pred.jsonl"), "--out", str(tmp_path / "e2.jsonl")]) == 0
    assert json.loads((tmp_path / "e2.jsonl").read_text())["accuracy"] == 1.0


def test_predict_empty(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    (tmp_path / "empty.jsonl").write_text("")
    assert main(["predict", str(tmp_path / "r" / "seed1.ckpt"), str(tmp_path / "empty.jsonl"), "--out", str(tmp_path / "p.jsonl")]) == 0
    assert (tmp_path / "p.jsonl").read_text() == ""


def test_evaluate_bad_checkpoint(tmp_path, capsys):
    (tmp_path / "x.ckpt").write_bytes(b"garbage")
    (tmp_path / "c.jsonl").write_text("")
    assert main(["evaluate", str(tmp_path / "x.ckpt"), str(tmp_path / "c.jsonl")]) == 2


def test_matrix_command(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    spec = {
        "train": {"clean": "corpus.jsonl"},
        "test": {"clean": "corpus.jsonl", "nopunct": {"path": "corpus.jsonl", "strip_punct": True}},
        "config": {k: v for k, v in json.loads(cfg.read_text()).items() if k not in ("corpus", "split")},
        "split": "split.txt",
    }
    (tmp_path / "m.json").write_text(json.dumps(spec))
    assert main(["matrix", str(tmp_path / "m.json"), "--seed", "1,2", "--out", str(tmp_path / "mx")]) == 0
    records = [json.loads(l) for l in (tmp_path / "mx" / "matrix.jsonl").read_text().splitlines()]
    assert len(records) == 2 and all(len(r["seeds"]) == 2 for r in records)
    assert "test \\ train" in (tmp_path / "mx" / "matrix.txt").read_text()
