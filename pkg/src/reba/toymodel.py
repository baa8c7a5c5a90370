"""A tiny deterministic causal transformer for self-contained testing.

Everything downstream (fusion, embeddings, evaluation) consumes attention
stacks and hidden states generically, so tests do not need a trained model;
they need genuine lower-triangular row-stochastic attentions and hidden
states that respect causality. This module provides exactly that:

* weights are drawn from a counter-based SplitMix64 generator, so the same
  (spec, seed) always reproduces bitwise-identical weights;
* the forward pass is plain numpy with a pinned accumulation order for the
  softmax denominators (ascending key index), no normalization layers, and
  float64 arithmetic throughout;
* appending tokens never changes earlier hidden states beyond float64
  noise, which is the causality property the embedding methods rely on.

Realism is a non-goal. Determinism and validity are the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import BundleHeader, TensorBundle
from .embed import repeat_tokens
from .errors import ValidationError

__all__ = [
    "ToyModelSpec",
    "LayerWeights",
    "ToyWeights",
    "init_model",
    "forward",
    "forward_arrays",
    "generate_bundle",
]

_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB


@dataclass(frozen=True)
class ToyModelSpec:
    """Shape and seed of the toy model. Defaults are the test workhorse."""

    vocab: int = 32
    dim: int = 16
    heads: int = 2
    layers: int = 2
    max_pos: int = 256
    seed: int = 42

    def __post_init__(self):
        if self.vocab < 2:
            raise ValidationError(f"vocab must be >= 2, got {self.vocab}")
        if self.heads < 1:
            raise ValidationError(f"heads must be >= 1, got {self.heads}")
        if self.dim < 1 or self.dim % self.heads != 0:
            raise ValidationError(
                f"dim must be a positive multiple of heads, got dim={self.dim} heads={self.heads}"
            )
        if self.layers < 1:
            raise ValidationError(f"layers must be >= 1, got {self.layers}")
        if self.max_pos < 1:
            raise ValidationError(f"max_pos must be >= 1, got {self.max_pos}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")

    @property
    def model_tag(self) -> str:
        return (
            f"toy(seed={self.seed},vocab={self.vocab},dim={self.dim},"
            f"heads={self.heads},layers={self.layers})"
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LayerWeights:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    w_1: np.ndarray
    w_2: np.ndarray


@dataclass(frozen=True)
class ToyWeights:
    spec: ToyModelSpec
    token_emb: np.ndarray
    positions: np.ndarray
    layers: tuple[LayerWeights, ...]


def _uniform_draws(seed: int, start: int, count: int) -> np.ndarray:
    """Draws start+1 .. start+count of the SplitMix64-style sequence.

    Draw number n mixes the state seed + n*gamma, so any block of the
    sequence can be generated independently; uint64 arithmetic wraps
    modulo 2**64 by construction.
    """
    index = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + index * np.uint64(_GAMMA)
        z = z ^ (z >> np.uint64(30))
        z = z * np.uint64(_MIX_1)
        z = z ^ (z >> np.uint64(27))
        z = z * np.uint64(_MIX_2)
        z = z ^ (z >> np.uint64(31))
    return z.astype(np.float64) / 2.0**64 * 0.2 - 0.1


def _positional_table(max_pos: int, dim: int) -> np.ndarray:
    """pos[t][2c] = sin(t / 10000**(2c/d)), pos[t][2c+1] = cos(same)."""
    t = np.arange(max_pos, dtype=np.float64)[:, None]
    pair = (np.arange(dim) // 2) * 2  # column j belongs to pair 2c = j - (j % 2)
    angles = t / np.power(10000.0, pair / dim)
    table = np.where(np.arange(dim) % 2 == 0, np.sin(angles), np.cos(angles))
    return table


def init_model(spec: ToyModelSpec) -> ToyWeights:
    """Draw all weights in a fixed order from the seeded generator.

    Order: token embedding, then per layer W_q, W_k, W_v, W_o, W_1, W_2,
    each filled row-major. The order is part of the contract; changing it
    changes every downstream golden value.
    """
    d = spec.dim
    offset = 0

    def draw(rows: int, cols: int) -> np.ndarray:
        nonlocal offset
        block = _uniform_draws(spec.seed, offset, rows * cols)
        offset += rows * cols
        return _freeze(block.reshape(rows, cols))

    token_emb = draw(spec.vocab, d)
    layers = []
    for _ in range(spec.layers):
        layers.append(
            LayerWeights(
                w_q=draw(d, d),
                w_k=draw(d, d),
                w_v=draw(d, d),
                w_o=draw(d, d),
                w_1=draw(d, 4 * d),
                w_2=draw(4 * d, d),
            )
        )
    positions = _freeze(_positional_table(spec.max_pos, d))
    return ToyWeights(spec=spec, token_emb=token_emb, positions=positions, layers=tuple(layers))


def _check_tokens(spec: ToyModelSpec, token_ids) -> list[int]:
    ids = [int(t) for t in token_ids]
    if not ids:
        raise ValidationError("token_ids must be non-empty")
    if len(ids) > spec.max_pos:
        raise ValidationError(
            f"sequence length {len(ids)} exceeds the positional table size {spec.max_pos}"
        )
    for j, t in enumerate(ids):
        if not 0 <= t < spec.vocab:
            raise ValidationError(f"token id {t} at position {j + 1} is outside [0, {spec.vocab})")
    return ids


def forward_arrays(weights: ToyWeights, token_ids) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass returning float64 (attentions, hidden_states).

    attentions has shape (layers, heads, m, m) with exact zeros above the
    diagonal; hidden_states has shape (m, dim) and is the final-layer
    output. These are the values bundles are cast from; the float64 form
    exists so causality can be asserted at 1e-10 rather than at float32
    resolution.
    """
    spec = weights.spec
    ids = _check_tokens(spec, token_ids)
    m, d, h = len(ids), spec.dim, spec.heads
    dh = d // h
    scale = math.sqrt(dh)
    causal = np.tril(np.ones((m, m), dtype=bool))

    x = weights.token_emb[ids] + weights.positions[:m]
    attentions = np.zeros((spec.layers, h, m, m), dtype=np.float64)

    for li, layer in enumerate(weights.layers):
        q = x @ layer.w_q
        k = x @ layer.w_k
        v = x @ layer.w_v
        context = np.empty_like(x)
        for head in range(h):
            cols = slice(head * dh, (head + 1) * dh)
            scores = (q[:, cols] @ k[:, cols].T) / scale
            scores = np.where(causal, scores, -np.inf)
            # Diagonal is always unmasked, so the row max is finite.
            shifted = scores - scores.max(axis=1, keepdims=True)
            numer = np.exp(shifted)  # exp(-inf) = 0 above the diagonal
            denom = np.cumsum(numer, axis=1).diagonal()  # ascending-j sums
            probs = numer / denom[:, None]
            attentions[li, head] = probs
            context[:, cols] = probs @ v[:, cols]
        x = x + context @ layer.w_o
        x = x + np.tanh(x @ layer.w_1) @ layer.w_2

    return attentions, x


def forward(
    weights: ToyWeights,
    token_ids,
    *,
    base_len: int | None = None,
    repetitions: int = 1,
) -> TensorBundle:
    """Run the model and package the outputs as a float32 bundle.

    ``base_len`` and ``repetitions`` describe how the caller built the
    token sequence; they default to the unrepeated interpretation.
    """
    attentions, states = forward_arrays(weights, token_ids)
    ids = [int(t) for t in token_ids]
    m = len(ids)
    if base_len is None:
        base_len = m
    header = BundleHeader(
        layers=weights.spec.layers,
        heads=weights.spec.heads,
        seq_len=m,
        hidden=weights.spec.dim,
        base_len=base_len,
        repetitions=repetitions,
        token_ids=tuple(ids),
        truncated=False,
        model_tag=weights.spec.model_tag,
    )
    return TensorBundle(
        header=header,
        attentions=attentions.astype(np.float32),
        hidden_states=states.astype(np.float32),
    )


def generate_bundle(spec: ToyModelSpec, token_ids, k: int) -> TensorBundle:
    """repeat_tokens then forward: the one-call path from ids to a bundle."""
    base = [int(t) for t in token_ids]
    if k < 1:
        raise ValidationError(f"repetition count must be >= 1, got {k}")
    if k * len(base) > spec.max_pos:
        raise ValidationError(
            f"k*n = {k * len(base)} exceeds the positional table size {spec.max_pos}"
        )
    weights = init_model(spec)
    repeated = repeat_tokens(base, k)
    return forward(weights, repeated, base_len=len(base), repetitions=k)
