"""Job descriptions: what to export, from which model, repeated how.

A job names a model, the input text, the repeat count k, a hard length
cap, and one of two repetition modes:

* ``TOKENIZE_THEN_REPEAT`` (default) tokenizes the text once and tiles
  the token ids k times, so the repeated sequence aligns with the base
  copy by construction — the property the engine's indexing relies on.
* ``REPEAT_TEXT_THEN_TOKENIZE`` joins k copies of the raw text with a
  single space and tokenizes the result. Tokenizers may merge or split
  across the copy boundaries, so alignment is checked afterwards rather
  than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ExportError

__all__ = ["RepeatMode", "ExportJob", "DEFAULT_MAX_LEN"]

DEFAULT_MAX_LEN = 1024


class RepeatMode(str, Enum):
    """How the repeated input sequence is produced."""

    TOKENIZE_THEN_REPEAT = "tokenize-then-repeat"
    REPEAT_TEXT_THEN_TOKENIZE = "repeat-text-then-tokenize"


@dataclass(frozen=True)
class ExportJob:
    """One export request: model, text, repeat count, length cap, mode."""

    model: str
    text: str
    repetitions: int = 1
    max_len: int = DEFAULT_MAX_LEN
    mode: RepeatMode = RepeatMode.TOKENIZE_THEN_REPEAT

    def __post_init__(self):
        object.__setattr__(self, "mode", RepeatMode(self.mode))
        if not str(self.model):
            raise ExportError("model identifier must be a non-empty string")
        if self.repetitions < 1:
            raise ExportError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.max_len < 1:
            raise ExportError(f"max length must be >= 1, got {self.max_len}")

    def with_text(self, text: str) -> "ExportJob":
        """Copy of this job for a different input text (manifest exports)."""
        return replace(self, text=text)
