"""Word and sentence embeddings: backward-attention, echo, and classical.

Three method families over one bundle of model outputs:

* backward-attention (``reba``): token i's embedding is the fused-attention
  weighted sum of the hidden states of token i and everything after it,
  e_i = sum_{j>=i} fused[i,j] * v_j. Repetition puts a second (or k-th)
  copy of the sentence after the first, so "everything after" includes the
  full sentence context.
* ``echo``: read hidden states straight out of the last repetition.
* ``classical``: read hidden states of the unrepeated prefix.

Token positions in public signatures are 1-based, matching how the methods
are usually written down; the single conversion to 0-based array indexing
happens at the top of each operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bundle import TensorBundle
from .errors import ValidationError
from .fusion import FusedAttention, column_weight_sums

__all__ = [
    "Method",
    "Pooling",
    "EchoMeanMode",
    "OpCounter",
    "EmbeddingVector",
    "EmbedRequest",
    "repeat_tokens",
    "reba_word_embedding",
    "reba_sentence_embedding",
    "echo_embedding",
    "classical_embedding",
    "compute_embedding",
]


class Method(str, Enum):
    REBA = "reba"
    ECHO = "echo"
    CLASSICAL = "classical"


class Pooling(str, Enum):
    LAST = "last"
    MEAN = "mean"
    WORD = "word"


class EchoMeanMode(str, Enum):
    """How echo mean pooling averages the repeated hidden states.

    LAST_OCCURRENCE averages the final copy's n states with weight 1/n.
    LITERAL averages rows n..k*n (1-based, so k*n - n + 1 states spanning
    every copy from the first copy's last token onward) with a fixed
    1/(2n) normalizer regardless of k.
    """

    LAST_OCCURRENCE = "last-occurrence"
    LITERAL = "paper-literal"


@dataclass
class OpCounter:
    """Counts weighted-vector accumulations, for cost instrumentation."""

    weighted_adds: int = 0


@dataclass(frozen=True)
class EmbeddingVector:
    """A float32 embedding plus the provenance of how it was produced.

    ``zero_weight`` marks the degenerate case where every usable attention
    weight was zero: the embedding is the zero vector and downstream cosine
    handling must decide what to do with it.
    """

    values: np.ndarray
    method: Method
    pool: Pooling
    k: int
    token_index: int | None = None
    zero_weight: bool = False

    def __post_init__(self):
        vec = np.ascontiguousarray(self.values, dtype=np.float32)
        vec.setflags(write=False)
        object.__setattr__(self, "values", vec)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class EmbedRequest:
    """Validated description of one embedding computation."""

    method: Method
    pool: Pooling
    k: int = 1
    token_index: int | None = None
    echo_mean_mode: EchoMeanMode = EchoMeanMode.LAST_OCCURRENCE
    normalize_weights: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "pool", Pooling(self.pool))
        object.__setattr__(self, "echo_mean_mode", EchoMeanMode(self.echo_mean_mode))
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.method is Method.CLASSICAL and self.k != 1:
            raise ValidationError("classical embeddings never consume repetition; k must be 1")
        if self.pool is Pooling.WORD and self.token_index is None:
            raise ValidationError("word pooling requires token_index")
        if self.pool is not Pooling.WORD and self.token_index is not None:
            raise ValidationError("token_index is only meaningful with word pooling")


def repeat_tokens(tokens, k: int) -> list[int]:
    """Repeat a token-id sequence k times: output[j] = tokens[j mod n]."""
    tokens = list(tokens)
    if not tokens:
        raise ValidationError("cannot repeat an empty token sequence")
    if k < 1:
        raise ValidationError(f"repetition count must be >= 1, got {k}")
    return tokens * k


def _check_dims(bundle: TensorBundle, fused: FusedAttention) -> None:
    m = bundle.header.seq_len
    if fused.matrix.shape != (m, m):
        raise ValidationError(
            f"fused matrix shape {fused.matrix.shape} does not match bundle seq_len {m}"
        )


def _word_vector_f64(
    bundle: TensorBundle,
    fused: FusedAttention,
    token_index: int,
    normalize_weights: bool,
    counter: OpCounter | None,
) -> tuple[np.ndarray, bool]:
    """Backward-attention sum for one token, in float64.

    Only rows j >= token_index of the hidden states are ever touched, so
    perturbing earlier rows cannot change the result, bit for bit.
    """
    n = bundle.header.base_len
    if not 1 <= token_index <= n:
        raise ValidationError(f"token_index must be in [1, {n}], got {token_index}")
    i0 = token_index - 1  # 1-based contract -> 0-based arrays
    weights = fused.matrix[i0, i0:].astype(np.float64)
    if normalize_weights:
        total = weights.sum()
        if total > 0.0:
            weights = weights / total
    if counter is not None:
        counter.weighted_adds += weights.size
    zero = not np.any(weights)
    vector = weights @ bundle.hidden_states[i0:].astype(np.float64)
    return vector, zero


def reba_word_embedding(
    bundle: TensorBundle,
    fused: FusedAttention,
    token_index: int,
    *,
    normalize_weights: bool = False,
    counter: OpCounter | None = None,
) -> EmbeddingVector:
    """e_i = sum_{j=i}^{m} fused[i, j] * v_j for original-sentence token i.

    The upper bound is the stored sequence length m (= k*n when the bundle
    is untruncated). Accumulates in float64, returns float32.
    """
    _check_dims(bundle, fused)
    vector, zero = _word_vector_f64(bundle, fused, token_index, normalize_weights, counter)
    return EmbeddingVector(
        values=vector.astype(np.float32),
        method=Method.REBA,
        pool=Pooling.WORD,
        k=bundle.header.repetitions,
        token_index=token_index,
        zero_weight=zero,
    )


def reba_sentence_embedding(
    bundle: TensorBundle,
    fused: FusedAttention,
    pool: Pooling,
    *,
    normalize_weights: bool = False,
    fast: bool = True,
    counter: OpCounter | None = None,
) -> EmbeddingVector:
    """Sentence embedding under last or mean pooling.

    Last pooling returns e_n. Mean pooling averages e_1..e_n; with
    ``fast=True`` (the default) the double sum is exchanged into a single
    weighted pass over all m hidden states using per-column weight totals,
    which costs m weighted adds instead of ~n*m. The naive path is kept
    both as a cross-check and for cost instrumentation.
    """
    _check_dims(bundle, fused)
    pool = Pooling(pool)
    header = bundle.header
    n, m = header.base_len, header.seq_len

    if pool is Pooling.LAST:
        vector, zero = _word_vector_f64(bundle, fused, n, normalize_weights, counter)
    elif pool is Pooling.MEAN:
        if fast and not normalize_weights:
            alpha = column_weight_sums(fused, n)
            if counter is not None:
                counter.weighted_adds += m
            zero = not np.any(alpha)
            vector = (alpha @ bundle.hidden_states.astype(np.float64)) / n
        else:
            # Normalized weights change per row, so the column-sum shortcut
            # does not apply; average the per-token vectors directly.
            total = np.zeros(header.hidden, dtype=np.float64)
            zero = True
            for i in range(1, n + 1):
                vec, vec_zero = _word_vector_f64(bundle, fused, i, normalize_weights, counter)
                total += vec
                zero = zero and vec_zero
            vector = total / n
    else:
        raise ValidationError("sentence pooling must be 'last' or 'mean'; use reba_word_embedding for words")

    return EmbeddingVector(
        values=vector.astype(np.float32),
        method=Method.REBA,
        pool=pool,
        k=header.repetitions,
        zero_weight=zero,
    )


def _echo_row(bundle: TensorBundle, index0: int, what: str) -> np.ndarray:
    m = bundle.header.seq_len
    if index0 >= m:
        raise ValidationError(
            f"{what} needs hidden row {index0 + 1} but the bundle is truncated to {m} states"
        )
    return bundle.hidden_states[index0].copy()


def echo_embedding(
    bundle: TensorBundle,
    pool: Pooling,
    token_index: int | None = None,
    *,
    mean_mode: EchoMeanMode = EchoMeanMode.LAST_OCCURRENCE,
) -> EmbeddingVector:
    """Embeddings read from the repeated copies, without backward attention.

    Word pooling returns the hidden state of the target word's last
    occurrence, row (k-1)*n + i; last pooling returns row k*n. Both are
    exact float32 row slices. Mean pooling follows ``mean_mode``.
    """
    header = bundle.header
    n, k = header.base_len, header.repetitions
    if k < 2:
        raise ValidationError("echo needs a bundle with k >= 2 repetitions; use classical for k=1")
    pool = Pooling(pool)

    if pool is Pooling.WORD:
        if token_index is None:
            raise ValidationError("word pooling requires token_index")
        if not 1 <= token_index <= n:
            raise ValidationError(f"token_index must be in [1, {n}], got {token_index}")
        values = _echo_row(bundle, (k - 1) * n + token_index - 1, f"echo word({token_index})")
        zero = False
    elif pool is Pooling.LAST:
        values = _echo_row(bundle, k * n - 1, "echo last pooling")
        zero = False
    else:
        mean_mode = EchoMeanMode(mean_mode)
        if mean_mode is EchoMeanMode.LAST_OCCURRENCE:
            if k * n > header.seq_len:
                raise ValidationError(
                    f"echo mean needs rows {(k - 1) * n + 1}..{k * n} but the bundle is truncated"
                )
            rows = bundle.hidden_states[(k - 1) * n : k * n].astype(np.float64)
            values = (rows.sum(axis=0) / n).astype(np.float32)
        else:
            # Fixed 1/(2n) normalizer over rows n..k*n (1-based), k*n - n + 1 terms.
            rows = bundle.hidden_states[n - 1 : k * n].astype(np.float64)
            if rows.shape[0] != k * n - n + 1:
                raise ValidationError(
                    f"echo mean needs rows {n}..{k * n} but the bundle is truncated"
                )
            values = (rows.sum(axis=0) / (2 * n)).astype(np.float32)
        zero = False

    return EmbeddingVector(
        values=values,
        method=Method.ECHO,
        pool=pool,
        k=k,
        token_index=token_index if pool is Pooling.WORD else None,
        zero_weight=zero,
    )


def classical_embedding(
    bundle: TensorBundle,
    pool: Pooling,
    token_index: int | None = None,
) -> EmbeddingVector:
    """Plain embeddings of the unrepeated sentence: rows 1..n only."""
    n = bundle.header.base_len
    pool = Pooling(pool)
    if pool is Pooling.WORD:
        if token_index is None:
            raise ValidationError("word pooling requires token_index")
        if not 1 <= token_index <= n:
            raise ValidationError(f"token_index must be in [1, {n}], got {token_index}")
        values = bundle.hidden_states[token_index - 1].copy()
    elif pool is Pooling.LAST:
        values = bundle.hidden_states[n - 1].copy()
    else:
        values = bundle.hidden_states[:n].astype(np.float64).mean(axis=0).astype(np.float32)
    return EmbeddingVector(
        values=values,
        method=Method.CLASSICAL,
        pool=pool,
        k=1,
        token_index=token_index if pool is Pooling.WORD else None,
    )


def compute_embedding(
    bundle: TensorBundle,
    request: EmbedRequest,
    fused: FusedAttention | None = None,
    *,
    counter: OpCounter | None = None,
) -> EmbeddingVector:
    """Dispatch a request to the right method, checking k consistency.

    ``fused`` is only consumed by the backward-attention method; passing it
    avoids refusing the stack for every embedding of the same bundle. When
    omitted it is computed with the default max-all-layers strategy.
    """
    if request.method in (Method.REBA, Method.ECHO) and request.k != bundle.header.repetitions:
        raise ValidationError(
            f"request k={request.k} does not match bundle repetitions={bundle.header.repetitions}"
        )
    if request.method is Method.REBA:
        if fused is None:
            from .fusion import fuse  # local import keeps module load cycle-free

            fused = fuse(bundle.attentions)
        if request.pool is Pooling.WORD:
            return reba_word_embedding(
                bundle,
                fused,
                request.token_index,
                normalize_weights=request.normalize_weights,
                counter=counter,
            )
        return reba_sentence_embedding(
            bundle,
            fused,
            request.pool,
            normalize_weights=request.normalize_weights,
            counter=counter,
        )
    if request.method is Method.ECHO:
        return echo_embedding(bundle, request.pool, request.token_index, mean_mode=request.echo_mean_mode)
    return classical_embedding(bundle, request.pool, request.token_index)
