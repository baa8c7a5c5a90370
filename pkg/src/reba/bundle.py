"""Bit-exact interchange container for attention tensors and hidden states.

A bundle file carries everything one embedding computation needs for a single
input sequence: every per-layer, per-head causal attention matrix, the
final-layer hidden states, and the token metadata tying them together.

Wire layout (all multi-byte values little-endian)::

    8 bytes   magic "REBABNDL"
    4 bytes   u32 header length H
    H bytes   UTF-8 JSON header (see BundleHeader)
    I*J*m*m   f32 attention values, layer-major, head-major, row-major
    m*d       f32 hidden-state values, row-major

Nothing else: readers reject trailing bytes. The header is human-inspectable
JSON; the payload is raw f32 so exporters in any ecosystem can emit the format
with no dependencies beyond a JSON encoder.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"REBABNDL"
BUNDLE_VERSION = 1
FILE_EXTENSION = ".reba"

# Exported probabilities round-trip through f32, hence the loose row-sum bound.
CAUSALITY_TOLERANCE = 1e-6
ROW_SUM_TOLERANCE = 1e-4
RANGE_TOLERANCE = 1e-6

# Guard against reading absurd header lengths from corrupt files.
_MAX_HEADER_BYTES = 16 << 20

_HEADER_FIELDS = (
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

PathOrFile = Union[str, Path, BinaryIO]


@dataclass(frozen=True)
class BundleHeader:
    """Metadata block of a bundle.

    ``seq_len`` is the full (possibly repeated) sequence length m,
    ``base_len`` the original sentence length n, and ``repetitions`` the
    repeat count k. Untruncated bundles satisfy m == k*n and repeat their
    token ids verbatim; truncated ones set ``truncated`` and only promise
    n <= m <= k*n.
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

    def to_json_bytes(self) -> bytes:
        doc = {
            "version": self.version,
            "layers": self.layers,
            "heads": self.heads,
            "seq_len": self.seq_len,
            "hidden": self.hidden,
            "base_len": self.base_len,
            "repetitions": self.repetitions,
            "truncated": self.truncated,
            "token_ids": list(self.token_ids),
            "dtype": self.dtype,
            "model_tag": self.model_tag,
            "notes": self.notes,
        }
        return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    @classmethod
    def from_json_bytes(cls, raw: bytes) -> "BundleHeader":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"header is not valid UTF-8 JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise FormatError("header JSON must be an object")
        missing = [name for name in _HEADER_FIELDS if name not in doc]
        if missing:
            raise FormatError(f"header field missing: {', '.join(missing)}")
        try:
            return cls(
                version=int(doc["version"]),
                layers=int(doc["layers"]),
                heads=int(doc["heads"]),
                seq_len=int(doc["seq_len"]),
                hidden=int(doc["hidden"]),
                base_len=int(doc["base_len"]),
                repetitions=int(doc["repetitions"]),
                truncated=bool(doc["truncated"]),
                token_ids=tuple(int(t) for t in doc["token_ids"]),
                dtype=str(doc["dtype"]),
                model_tag=str(doc["model_tag"]),
                notes=str(doc["notes"]),
            )
        except (TypeError, ValueError) as exc:
            raise FormatError(f"header field has wrong type: {exc}") from exc


@dataclass(frozen=True)
class TensorBundle:
    """One sequence's attention stack plus hidden states, ready to share.

    ``attentions`` has shape (layers, heads, m, m); ``hidden_states`` has
    shape (m, hidden). Both are C-contiguous float32 and frozen read-only:
    a constructed bundle is immutable and safe to use from many threads.
    """

    header: BundleHeader
    attentions: np.ndarray
    hidden_states: np.ndarray

    def __post_init__(self):
        att = np.ascontiguousarray(self.attentions, dtype=np.float32)
        hid = np.ascontiguousarray(self.hidden_states, dtype=np.float32)
        att.setflags(write=False)
        hid.setflags(write=False)
        object.__setattr__(self, "attentions", att)
        object.__setattr__(self, "hidden_states", hid)


@dataclass(frozen=True)
class Violation:
    """One failed invariant, located by 0-based tensor coordinates."""

    code: str
    where: tuple[int, ...]
    message: str

    def __str__(self) -> str:
        if self.where:
            coords = ",".join(str(c) for c in self.where)
            return f"{self.code} at ({coords}): {self.message}"
        return f"{self.code}: {self.message}"


def validate_bundle(bundle: TensorBundle) -> list[Violation]:
    """Check every bundle invariant; return all violations (empty = valid).

    Violations are data, not errors: callers that must fail hard raise
    :class:`ValidationError` from the first entry, as read_bundle does.
    Check order is deterministic: header consistency, token alignment,
    attention causality, row sums, value range, finiteness, hidden states.
    """
    out: list[Violation] = []
    h = bundle.header

    if h.version != BUNDLE_VERSION:
        out.append(Violation("header field", (), f"version must be {BUNDLE_VERSION}, got {h.version}"))
    if h.dtype != "f32":
        out.append(Violation("header field", (), f"dtype must be 'f32', got {h.dtype!r}"))
    for name in ("layers", "heads", "seq_len", "hidden", "base_len", "repetitions"):
        value = getattr(h, name)
        if value < 1:
            out.append(Violation("header field", (), f"{name} must be >= 1, got {value}"))
    if any(getattr(h, n) < 1 for n in ("seq_len", "base_len", "repetitions")):
        return out  # remaining checks would index with nonsense sizes

    m, n, k = h.seq_len, h.base_len, h.repetitions
    if len(h.token_ids) != m:
        out.append(
            Violation("token_ids length", (), f"expected {m} token ids, got {len(h.token_ids)}")
        )
    if h.truncated:
        if not (n <= m <= k * n):
            out.append(
                Violation("sequence length", (), f"truncated bundle needs n <= m <= k*n, got n={n} m={m} k={k}")
            )
    else:
        if m != k * n:
            out.append(
                Violation("sequence length", (), f"untruncated bundle needs m == k*n, got n={n} m={m} k={k}")
            )
        elif len(h.token_ids) == m:
            for i in range(n, m):
                if h.token_ids[i] != h.token_ids[i % n]:
                    out.append(
                        Violation(
                            "repetition alignment",
                            (i,),
                            f"token_ids[{i}]={h.token_ids[i]} != token_ids[{i % n}]={h.token_ids[i % n]}",
                        )
                    )

    att = bundle.attentions
    expected = (h.layers, h.heads, m, m)
    if att.shape != expected:
        out.append(Violation("attention shape", (), f"expected {expected}, got {att.shape}"))
    else:
        bad = np.argwhere(~np.isfinite(att))
        nonfinite = {tuple(int(c) for c in coord) for coord in bad}
        for coord in bad:
            out.append(Violation("non-finite attention", tuple(int(c) for c in coord), "NaN or Inf"))
        upper = np.triu_indices(m, k=1)
        for coord in np.argwhere(np.abs(att[:, :, upper[0], upper[1]]) > CAUSALITY_TOLERANCE):
            p, q, u = (int(c) for c in coord)
            where = (p, q, int(upper[0][u]), int(upper[1][u]))
            if where not in nonfinite:
                out.append(
                    Violation("non-causal attention", where, f"entry above diagonal is {float(att[where])!r}")
                )
        with np.errstate(invalid="ignore"):
            sums = att.sum(axis=3, dtype=np.float64)
            for coord in np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE):
                where = tuple(int(c) for c in coord)
                out.append(Violation("row sum", where, f"row sums to {float(sums[where])!r}, expected 1"))
            low = att < 0.0
            high = att > 1.0 + RANGE_TOLERANCE
            for coord in np.argwhere(low | high):
                where = tuple(int(c) for c in coord)
                if where not in nonfinite:
                    out.append(Violation("attention range", where, f"entry {float(att[where])!r} outside [0, 1]"))

    hid = bundle.hidden_states
    if hid.shape != (m, h.hidden):
        out.append(Violation("hidden shape", (), f"expected {(m, h.hidden)}, got {hid.shape}"))
    else:
        for coord in np.argwhere(~np.isfinite(hid)):
            out.append(Violation("non-finite hidden", tuple(int(c) for c in coord), "NaN or Inf"))

    return out


def _payload_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f4").tobytes()


def write_bundle(bundle: TensorBundle, destination: PathOrFile) -> int:
    """Serialize a validated bundle; return the number of bytes written.

    Refuses to write anything if the bundle fails validate_bundle, so a
    failed call never leaves a partial file behind.
    """
    violations = validate_bundle(bundle)
    if violations:
        raise ValidationError(str(violations[0]), violations=tuple(violations))

    header = bundle.header.to_json_bytes()
    chunks = (
        MAGIC,
        struct.pack("<I", len(header)),
        header,
        _payload_bytes(bundle.attentions),
        _payload_bytes(bundle.hidden_states),
    )
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            for chunk in chunks:
                sink.write(chunk)
    else:
        for chunk in chunks:
            destination.write(chunk)
    return sum(len(c) for c in chunks)


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise FormatError(f"truncated file: expected {count} bytes of {what}, got {len(data)}")
    return data


def read_bundle(source: PathOrFile) -> TensorBundle:
    """Parse and fully validate a bundle from a file path or binary stream.

    Raises FormatError for structural problems (magic, sizes, header JSON)
    and ValidationError naming the first violated invariant otherwise.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_bundle(fh)

    magic = source.read(len(MAGIC))
    if magic != MAGIC:
        raise FormatError(f"bad magic: expected {MAGIC!r}, got {magic!r}")
    (header_len,) = struct.unpack("<I", _read_exact(source, 4, "header length"))
    if header_len > _MAX_HEADER_BYTES:
        raise FormatError(f"header length {header_len} exceeds {_MAX_HEADER_BYTES} byte cap")
    header = BundleHeader.from_json_bytes(_read_exact(source, header_len, "header"))

    m, d = header.seq_len, header.hidden
    att_count = header.layers * header.heads * m * m
    att_raw = _read_exact(source, att_count * 4, "attention payload")
    hid_raw = _read_exact(source, m * d * 4, "hidden payload")
    if source.read(1):
        raise FormatError("trailing data after declared payload")

    attentions = np.frombuffer(att_raw, dtype="<f4").reshape(header.layers, header.heads, m, m)
    hidden = np.frombuffer(hid_raw, dtype="<f4").reshape(m, d)
    bundle = TensorBundle(header=header, attentions=attentions, hidden_states=hidden)
    violations = validate_bundle(bundle)
    if violations:
        raise ValidationError(str(violations[0]), violations=tuple(violations))
    return bundle
