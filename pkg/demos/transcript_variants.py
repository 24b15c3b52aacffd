#! /usr/bin/env python3
# Train x test grids over transcript variants: a recognizer-style corruption
# that swaps 30% of word types, and removal of punctuation.

from dactag import TrainConfig, VariantSpec, MatrixSpec, run_matrix, split_conversations, strip_punctuation
from dactag.corpus import CorpusSplit
from dactag.synthetic import corrupt_tokens, cycle_corpus, punctuation_corpus, split_ids

small = dict(embedding_dim=16, filters_per_width=8, max_len=8, batch_size=20,
             optimizer="adagrad", learning_rate=0.07, max_epochs=20, patience=3, seeds=(1, 2, 3))

convs = cycle_corpus(100, 20, n_labels=4, seed=1)
clean = split_conversations(convs, split_ids(convs))
noisy = CorpusSplit(*(corrupt_tokens(clean[s], 0.3, seed=0) for s in ("train", "valid", "test")), clean.labels)
variants = [VariantSpec("clean", corpus=clean), VariantSpec("corrupt", corpus=noisy)]
print("word-type corruption (cells: avg (min, max) accuracy %)")
print(run_matrix(MatrixSpec(variants, variants, TrainConfig(context=2, **small))).render())

convs = punctuation_corpus(100, 10, n_labels=4, seed=2)
punct = split_conversations(convs, split_ids(convs))
bare = punct.map(strip_punctuation)
variants = [VariantSpec("punct", corpus=punct), VariantSpec("stripped", corpus=bare)]
print("\npunctuation removal")
print(run_matrix(MatrixSpec(variants, variants, TrainConfig(context=2, **small))).render())
