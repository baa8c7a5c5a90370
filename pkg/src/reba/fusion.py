"""Symmetrize per-head causal attention and fuse it into one matrix.

Every lower-triangular attention matrix A is first made symmetric,
(A + A^T) / 2, so that the weight between tokens i and j no longer depends
on which of them came first. The per-layer, per-head symmetric matrices are
then fused with the maximum update rule

    A_new <- (A_new + A_sym) / 2 + |A_new - A_sym| / 2

starting from zero, which keeps, for every token pair, the strongest
attention any head in any layer assigned to it. The update is algebraically
elementwise max, so the implementation reduces over the whole stack at once;
the iterative form survives in the test suite as a cross-check.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import FormatError, NumericError, ValidationError

FUSED_MAGIC_LEN = 8  # two little-endian u32: rows, cols


class FusionStrategy(str, Enum):
    """Which attention matrices participate in the max fusion."""

    MAX_ALL_LAYERS = "max-all"
    LAST_LAYER_ONLY = "last-layer"


@dataclass(frozen=True)
class FusedAttention:
    """Symmetric fused attention matrix, stored as float32.

    Bitwise symmetry is guaranteed by construction (IEEE addition is
    commutative, and max over the same values is order-free), not by a
    post-hoc fixup.
    """

    matrix: np.ndarray
    strategy: FusionStrategy

    def __post_init__(self):
        mat = np.ascontiguousarray(self.matrix, dtype=np.float32)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (a + a^T) / 2 in float64.

    The result is bitwise symmetric. Input is expected causal (lower
    triangular); that precondition is the caller's to uphold, but NaNs are
    rejected here because they would silently poison every downstream max.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"attention matrix must be square, got shape {a.shape}")
    if np.isnan(a).any():
        raise NumericError("attention matrix contains NaN")
    return (a + a.T) / 2.0


def fuse(attentions: np.ndarray, strategy: FusionStrategy = FusionStrategy.MAX_ALL_LAYERS) -> FusedAttention:
    """Fuse a (layers, heads, m, m) stack into one symmetric matrix.

    MAX_ALL_LAYERS takes the elementwise max of every symmetrized matrix in
    the stack; LAST_LAYER_ONLY restricts the same fusion to the final
    layer's heads. Accumulation happens in float64 and the result is cast
    to float32 once, so the outcome is independent of visitation order.
    """
    stack = np.asarray(attentions, dtype=np.float64)
    if stack.ndim != 4:
        raise ValidationError(f"attention stack must be 4-D (layers, heads, m, m), got shape {stack.shape}")
    layers, heads, rows, cols = stack.shape
    if layers < 1 or heads < 1 or rows < 1:
        raise ValidationError("attention stack is empty")
    if rows != cols:
        raise ValidationError(f"attention matrices must be square, got {rows}x{cols}")
    if np.isnan(stack).any():
        raise NumericError("attention stack contains NaN")

    if strategy == FusionStrategy.LAST_LAYER_ONLY:
        stack = stack[-1:]
    sym = (stack + stack.transpose(0, 1, 3, 2)) / 2.0
    fused = sym.max(axis=(0, 1))
    return FusedAttention(matrix=fused.astype(np.float32), strategy=FusionStrategy(strategy))


def column_weight_sums(fused: FusedAttention | np.ndarray, base_len: int) -> np.ndarray:
    """Per-column weight totals used by the linear-time mean pooling.

    Column k (0-based) sums rows 0..min(base_len-1, k) of the fused matrix,
    i.e. only the weights that some original-sentence token contributes
    backward. Summation runs in float64 via a cumulative sum, which is the
    ascending-order accumulation the fast pooling path relies on.
    """
    matrix = fused.matrix if isinstance(fused, FusedAttention) else np.asarray(fused)
    m = matrix.shape[0]
    if not 1 <= base_len <= m:
        raise ValidationError(f"base_len must be in [1, {m}], got {base_len}")
    partial = np.cumsum(matrix[:base_len].astype(np.float64), axis=0)
    last_row = np.minimum(np.arange(m), base_len - 1)
    return partial[last_row, np.arange(m)]


PathOrFile = Union[str, Path, BinaryIO]


def write_fused_matrix(fused: FusedAttention, destination: PathOrFile) -> int:
    """Dump the fused matrix: two u32 LE (rows, cols) then row-major f32 LE."""
    m = fused.size
    blob = struct.pack("<II", m, m) + np.ascontiguousarray(fused.matrix, dtype="<f4").tobytes()
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            sink.write(blob)
    else:
        destination.write(blob)
    return len(blob)


def read_fused_matrix(source: PathOrFile) -> np.ndarray:
    """Read a matrix written by write_fused_matrix; returns float32 (m, m)."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_fused_matrix(fh)
    head = source.read(FUSED_MAGIC_LEN)
    if len(head) != FUSED_MAGIC_LEN:
        raise FormatError("truncated fused-matrix file: missing size header")
    rows, cols = struct.unpack("<II", head)
    raw = source.read(rows * cols * 4)
    if len(raw) != rows * cols * 4:
        raise FormatError(f"truncated fused-matrix file: expected {rows * cols * 4} payload bytes")
    if source.read(1):
        raise FormatError("trailing data after fused-matrix payload")
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
