#! /usr/bin/env python3
# Labels follow a fixed cycle and each utterance carries only a noisy cue word.
# A CRF over a 3-utterance window can use the label sequence; a per-utterance
# softmax classifier cannot.

import numpy as np

from dactag import TrainConfig, evaluate, fit, majority_baseline, split_conversations
from dactag.synthetic import cycle_corpus, split_ids

convs = cycle_corpus(200, 20, n_labels=4, noise=0.2, seed=0)
corpus = split_conversations(convs, split_ids(convs))
print("utterances per split", corpus.counts())
print("example:", " | ".join(f"{u.label}: {' '.join(u.tokens)}" for u in convs[0].utterances[:4]))

train_labels = [u.label for c in corpus.train for u in c.utterances]
test_labels = [u.label for c in corpus.test for u in c.utterances]
print(f"majority class {100 * majority_baseline(train_labels, test_labels):.1f}%")

small = dict(embedding_dim=16, filters_per_width=8, max_len=6, batch_size=20,
             optimizer="adagrad", learning_rate=0.07, max_epochs=30, patience=5, seeds=(1, 2, 3))

for label, cfg in [
    ("softmax, no context", TrainConfig(context=0, head="softmax", **small)),
    ("CRF, 2 previous", TrainConfig(context=2, head="crf", **small)),
]:
    result = fit(corpus, cfg)
    accs = [evaluate(c, corpus).accuracy for c in result.checkpoints]
    print(f"{label:<20} test {100 * np.mean(accs):.1f}% (min {100 * min(accs):.1f}, max {100 * max(accs):.1f})")
