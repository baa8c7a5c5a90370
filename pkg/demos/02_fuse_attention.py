"""
Fusing attention stacks into one symmetric matrix
=================================================

A causal model records L*H separate attention matrices, each strictly
lower-triangular. Fusion first symmetrizes each one, (A + A^T) / 2, so
that "i attends to j" and "j attends to i" contribute equally, then takes
the elementwise maximum across all matrices: a connection is kept if any
layer or head found it.
"""

import numpy as np

from reba import FusionStrategy, ToyModelSpec, fuse, generate_bundle, symmetrize

bundle = generate_bundle(ToyModelSpec(), [7, 2, 9, 4], k=2)

# One matrix, symmetrized: the upper triangle fills in with half of the
# mirrored lower triangle.
one = bundle.attentions[0, 0].astype(np.float64)
with np.printoptions(precision=3, suppress=True):
    print("causal matrix (layer 0, head 0):")
    print(one[:4, :4])
    print("\nsymmetrized:")
    print(symmetrize(one)[:4, :4])

# Fusing the whole stack. The result is float32, bitwise symmetric, and
# dominates every symmetrized input elementwise.
fused = fuse(bundle.attentions, FusionStrategy.MAX_ALL_LAYERS)
print(f"\nfused matrix: {fused.size}x{fused.size}, strategy {fused.strategy.value}")
print("bitwise symmetric:", np.array_equal(fused.matrix, fused.matrix.T))

dominates = all(
    np.all(fused.matrix.astype(np.float64) >= symmetrize(bundle.attentions[p, q].astype(np.float64)) - 1e-6)
    for p in range(2)
    for q in range(2)
)
print("dominates every symmetrized input:", dominates)

# The maximum is order-independent, so the fused matrix does not depend on
# how the stack is traversed. A last-layer-only variant is available when
# only the final layer's connectivity matters.
last = fuse(bundle.attentions, FusionStrategy.LAST_LAYER_ONLY)
changed = float(np.max(np.abs(last.matrix - fused.matrix)))
print(f"last-layer-only differs from max-all by up to {changed:.4f}")
