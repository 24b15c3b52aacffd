#! /usr/bin/env python3
# Exact inference on a tiny label chain, checked against brute-force enumeration.

import itertools

import numpy as np

from dactag.crf import TransitionParams, log_partition, marginals, nll, viterbi

rng = np.random.default_rng(0)
L, C = 4, 3
S = rng.uniform(-3, 3, size=(L, C))
trans = TransitionParams(rng.uniform(-1, 1, size=(C, C)), rng.uniform(-1, 1, size=C))


def score(path):
    s = trans.start[path[0]] + sum(S[t, y] for t, y in enumerate(path))
    return s + sum(trans.T[a, b] for a, b in zip(path, path[1:]))


paths = list(itertools.product(range(C), repeat=L))
scores = np.array([score(p) for p in paths])

print("log Z (forward)    ", log_partition(S, trans))
print("log Z (enumeration)", np.log(np.exp(scores).sum()))

unary, pairwise = marginals(S, trans)
print("\nposterior label marginals, one row per position:")
print(np.round(unary, 3))
print("rows sum to", unary.sum(axis=1))

best, best_score = viterbi(S, trans)
print("\nviterbi path", best, "score", round(best_score, 4))
print("argmax path ", list(paths[int(np.argmax(scores))]))

gold = [0, 1, 2, 0]
print("\nNLL of", gold, "=", round(nll(S, trans, gold), 4))

# the oldest slot is padding: it is skipped, not scored
pad = np.array([True, False, False, False])
print("NLL with a padded first slot =", round(nll(S, trans, [-1, 1, 2, 0], pad), 4))
