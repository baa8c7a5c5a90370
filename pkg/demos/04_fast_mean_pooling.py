"""
Mean pooling in linear time by exchanging the summation order
=============================================================

The mean sentence embedding averages n per-token embeddings, each of which
is itself a weighted sum over up to m = k*n hidden states: a double sum
costing on the order of n*m weighted vector additions. Exchanging the
order of summation collapses it to one pass: first total the attention
weights per column (a cheap scalar reduction over the fused matrix), then
take a single weighted sum of the m hidden states.
"""

import numpy as np

from reba import (
    OpCounter,
    Pooling,
    ToyModelSpec,
    column_weight_sums,
    fuse,
    generate_bundle,
    reba_sentence_embedding,
)

for n in (8, 32, 96):
    tokens = [int(t) for t in np.random.default_rng(n).integers(0, 32, size=n)]
    bundle = generate_bundle(ToyModelSpec(), tokens, k=2)
    fused = fuse(bundle.attentions)
    m = bundle.header.seq_len

    fast_counter = OpCounter()
    fast = reba_sentence_embedding(bundle, fused, Pooling.MEAN, counter=fast_counter)

    naive_counter = OpCounter()
    naive = reba_sentence_embedding(bundle, fused, Pooling.MEAN, fast=False,
                                    counter=naive_counter)

    worst = float(np.max(np.abs(fast.values - naive.values)))
    print(f"n={n:3d} (m={m:3d}): fast {fast_counter.weighted_adds:6d} adds, "
          f"naive {naive_counter.weighted_adds:6d} adds, "
          f"max abs difference {worst:.2e}")

# The per-column weight totals are the whole trick: column j's weight is
# the sum of fused[i][j] over the base tokens i that can reach it.
bundle = generate_bundle(ToyModelSpec(), [3, 1, 4], k=2)
fused = fuse(bundle.attentions)
alpha = column_weight_sums(fused, bundle.header.base_len)
with np.printoptions(precision=3, suppress=True):
    print("\ncolumn weight totals for n=3, k=2:", alpha)
