#! /usr/bin/env python3
# Central finite differences against the analytic gradient of the full model loss.

import numpy as np

from dactag.model import DialogActModel, WindowBatch

rng = np.random.default_rng(3)
V, C, d, n, L = 7, 3, 5, 2, 6
model = DialogActModel.init(V, C, rng, d=d, widths=(3, 4, 5), filters_per_width=2)
model.trans.T[:] = rng.normal(size=(C, C))
model.trans.start[:] = rng.normal(size=C)
# with zero biases, all-PAD positions pre-activate at exactly 0, which is the
# ReLU kink; finite differences straddle it, so move the biases off zero
for b in model.bank.biases:
    b[:] = rng.normal(size=b.shape) * 0.1

N = 4
grids = rng.integers(0, V, size=(N, n + 1, L))
gold = rng.integers(0, C, size=(N, n + 1))
pad = np.zeros((N, n + 1), dtype=bool)
pad[0, :2] = True  # first window sits at the start of its conversation
grids[0, :2] = 0
gold[0, :2] = -1
batch = WindowBatch(grids, gold, pad)

loss, _, grads = model.loss_and_grads(batch, train=False)
ids, rows = grads.pop("embedding")
grads["embedding"] = np.zeros_like(model.table.matrix)
np.add.at(grads["embedding"], ids, rows)
params = dict(model.dense_params(), embedding=model.table.matrix)

print(f"mean NLL {loss:.6f}\n")
print(f"{'group':<14} {'size':>5} {'max rel err':>12}")
h = 1e-5
for name, p in params.items():
    num = np.zeros_like(p)
    for i in np.ndindex(p.shape):
        if name == "embedding" and i[0] == 0:
            continue  # the PAD row is frozen at zero
        old = p[i]
        p[i] = old + h
        up = model.loss(batch)
        p[i] = old - h
        down = model.loss(batch)
        p[i] = old
        num[i] = (up - down) / (2 * h)
    g = grads[name]
    err = np.abs(g - num) / np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-6)
    print(f"{name:<14} {p.size:>5} {err.max():>12.2e}")
