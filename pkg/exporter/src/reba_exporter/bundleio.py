"""Standalone writer for the engine's binary bundle format.

This package talks to the embedding engine only through its public file
format, so the writer here is implemented from the documented layout and
imports nothing from the engine:

* magic ``REBABNDL``;
* an unsigned 32-bit little-endian header length;
* a UTF-8 JSON header whose keys appear in the fixed order ``version,
  layers, heads, seq_len, hidden, base_len, repetitions, truncated,
  token_ids, dtype, model_tag, notes``;
* the attention payload: float32 little-endian, layer-major, then head,
  then row-major ``m x m`` matrices;
* the hidden-state payload: float32 little-endian, row-major ``m x d``.

Before writing, :func:`write_bundle` checks the same validity contract the
engine enforces on read (causal rows that sum to one, length bounds,
repetition alignment) and refuses to produce a file that would be
rejected, leaving nothing behind on failure.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExportError

__all__ = [
    "MAGIC",
    "BUNDLE_VERSION",
    "HEADER_KEY_ORDER",
    "CAUSALITY_TOLERANCE",
    "ROW_SUM_TOLERANCE",
    "RANGE_TOLERANCE",
    "BundleHeader",
    "header_json_bytes",
    "bundle_bytes",
    "write_bundle",
]

MAGIC = b"REBABNDL"
BUNDLE_VERSION = 1

# Tolerances of the engine's read-side validity contract. Exports must sit
# inside these bounds or the engine will refuse the file.
CAUSALITY_TOLERANCE = 1e-6
ROW_SUM_TOLERANCE = 1e-4
RANGE_TOLERANCE = 1e-6

HEADER_KEY_ORDER = (
    "version",
    "layers",
    "heads",
    "seq_len",
    "hidden",
    "base_len",
    "repetitions",
    "truncated",
    "token_ids",
    "dtype",
    "model_tag",
    "notes",
)


@dataclass(frozen=True)
class BundleHeader:
    """Mirror of the bundle file's JSON metadata block.

    ``seq_len`` is the full (possibly repeated) sequence length m,
    ``base_len`` the original sentence length n, and ``repetitions`` the
    repeat count k. Untruncated bundles promise m == k*n with token ids
    repeating verbatim; the ``truncated`` flag relaxes that to
    n <= m <= k*n and also marks sequences whose copies did not align.
    """

    layers: int
    heads: int
    seq_len: int
    hidden: int
    base_len: int
    repetitions: int
    token_ids: tuple[int, ...]
    truncated: bool = False
    dtype: str = "f32"
    model_tag: str = ""
    notes: str = ""
    version: int = BUNDLE_VERSION

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(int(t) for t in self.token_ids))


def header_json_bytes(header: BundleHeader) -> bytes:
    """Serialize a header to the exact JSON byte form the format uses."""
    doc = {
        "version": header.version,
        "layers": header.layers,
        "heads": header.heads,
        "seq_len": header.seq_len,
        "hidden": header.hidden,
        "base_len": header.base_len,
        "repetitions": header.repetitions,
        "truncated": header.truncated,
        "token_ids": list(header.token_ids),
        "dtype": header.dtype,
        "model_tag": header.model_tag,
        "notes": header.notes,
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _contract_problems(
    header: BundleHeader, attentions: np.ndarray, hidden_states: np.ndarray
) -> list[str]:
    """Return every way this bundle would fail the engine's validation."""
    problems: list[str] = []
    h = header
    if h.version != BUNDLE_VERSION:
        problems.append(f"version must be {BUNDLE_VERSION}, got {h.version}")
    if h.dtype != "f32":
        problems.append(f"dtype must be 'f32', got {h.dtype!r}")
    for name in ("layers", "heads", "seq_len", "hidden", "base_len", "repetitions"):
        if getattr(h, name) < 1:
            problems.append(f"{name} must be >= 1, got {getattr(h, name)}")
    if problems:
        return problems

    m, n, k = h.seq_len, h.base_len, h.repetitions
    if len(h.token_ids) != m:
        problems.append(f"expected {m} token ids, got {len(h.token_ids)}")
    if h.truncated:
        if not (n <= m <= k * n):
            problems.append(
                f"truncated bundle needs n <= m <= k*n, got n={n} m={m} k={k}"
            )
    else:
        if m != k * n:
            problems.append(
                f"untruncated bundle needs m == k*n, got n={n} m={m} k={k}"
            )
        elif len(h.token_ids) == m:
            for i in range(n, m):
                if h.token_ids[i] != h.token_ids[i % n]:
                    problems.append(
                        f"token_ids[{i}]={h.token_ids[i]} != "
                        f"token_ids[{i % n}]={h.token_ids[i % n]}"
                    )

    att = np.asarray(attentions)
    if att.shape != (h.layers, h.heads, m, m):
        problems.append(
            f"attention shape {att.shape} != {(h.layers, h.heads, m, m)}"
        )
    else:
        if not np.isfinite(att).all():
            problems.append("attention contains NaN or Inf")
        else:
            upper = np.triu_indices(m, k=1)
            above = np.abs(att[:, :, upper[0], upper[1]])
            if above.size and float(above.max(initial=0.0)) > CAUSALITY_TOLERANCE:
                problems.append(
                    f"entries above the diagonal reach {float(above.max())!r}, "
                    f"allowed {CAUSALITY_TOLERANCE}"
                )
            sums = att.sum(axis=3, dtype=np.float64)
            worst = float(np.abs(sums - 1.0).max())
            if worst > ROW_SUM_TOLERANCE:
                problems.append(
                    f"attention rows deviate from sum 1 by {worst!r}, "
                    f"allowed {ROW_SUM_TOLERANCE}"
                )
            if float(att.min()) < 0.0 or float(att.max()) > 1.0 + RANGE_TOLERANCE:
                problems.append("attention entries fall outside [0, 1]")

    hid = np.asarray(hidden_states)
    if hid.shape != (m, h.hidden):
        problems.append(f"hidden-state shape {hid.shape} != {(m, h.hidden)}")
    elif not np.isfinite(hid).all():
        problems.append("hidden states contain NaN or Inf")
    return problems


def bundle_bytes(
    header: BundleHeader, attentions: np.ndarray, hidden_states: np.ndarray
) -> bytes:
    """Serialize a checked bundle to its complete byte representation."""
    problems = _contract_problems(header, attentions, hidden_states)
    if problems:
        raise ExportError(
            "refusing to write a bundle the engine would reject: "
            + "; ".join(problems)
        )
    head = header_json_bytes(header)
    att = np.ascontiguousarray(np.asarray(attentions), dtype="<f4")
    hid = np.ascontiguousarray(np.asarray(hidden_states), dtype="<f4")
    return b"".join(
        (MAGIC, struct.pack("<I", len(head)), head, att.tobytes(), hid.tobytes())
    )


def write_bundle(
    destination: str | Path,
    header: BundleHeader,
    attentions: np.ndarray,
    hidden_states: np.ndarray,
) -> int:
    """Write a bundle file, returning the number of bytes written.

    The payload is checked against the engine's validity contract first;
    on failure nothing is written and :class:`ExportError` is raised.
    """
    raw = bundle_bytes(header, attentions, hidden_states)
    path = Path(destination)
    path.write_bytes(raw)
    return len(raw)
