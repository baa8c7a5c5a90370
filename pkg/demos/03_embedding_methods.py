"""
Three embedding methods over one repeated sentence
==================================================

Classical embeddings read the hidden states of the plain sentence: token
i's state has only seen tokens 1..i. Echo embeddings read the states of
the last repetition, where every token has already seen the whole
sentence once. Backward-attention embeddings go further: token i's
embedding is a fused-attention weighted sum over the states of every
position from i to the end of the repeated sequence.
"""

import numpy as np

from reba import (
    Pooling,
    ToyModelSpec,
    classical_embedding,
    cosine_similarity,
    echo_embedding,
    fuse,
    generate_bundle,
    reba_word_embedding,
)

bundle = generate_bundle(ToyModelSpec(), [3, 1, 4, 1, 5], k=2)
fused = fuse(bundle.attentions)
n = bundle.header.base_len

# Embed the first token under each method. In a causal model the first
# token is the worst case: classically it has seen nothing but itself.
token = 1
classical = classical_embedding(bundle, Pooling.WORD, token).values
echo = echo_embedding(bundle, Pooling.WORD, token).values
backward = reba_word_embedding(bundle, fused, token).values

print(f"token {token} of {n}, hidden dim {bundle.header.hidden}")
with np.printoptions(precision=3, suppress=True):
    print("classical:", classical[:6], "...")
    print("echo:     ", echo[:6], "...")
    print("backward: ", backward[:6], "...")

# The methods disagree most at the start of the sentence and agree most at
# the end, where even the classical state has full left context.
print("\ncosine(classical, backward) per token:")
for i in range(1, n + 1):
    a = classical_embedding(bundle, Pooling.WORD, i).values
    b = reba_word_embedding(bundle, fused, i).values
    print(f"  token {i}: {cosine_similarity(a, b):+.4f}")

# Echo word embeddings are exact rows of the hidden-state matrix: the
# second copy of token i sits at position n + i.
row = bundle.hidden_states[n + token - 1]
print("\necho embedding is hidden row n+i, bitwise:", np.array_equal(echo, row))
