"""Exception hierarchy for the exporter.

Every failure the exporter can produce on purpose derives from
``ExporterError`` so callers can catch one type. The subclasses separate
"the model cannot provide what we need" (:class:`CapabilityError`),
"this job cannot be written as a valid bundle" (:class:`ExportError`),
and "the question file is malformed" (:class:`QuestionFormatError`),
because the command line maps them to different exit codes.
"""

from __future__ import annotations

__all__ = [
    "ExporterError",
    "CapabilityError",
    "ExportError",
    "QuestionFormatError",
]


class ExporterError(Exception):
    """Base class for all errors raised intentionally by this package."""


class CapabilityError(ExporterError):
    """The model or tokenizer cannot report something the export needs.

    Raised when a model does not return per-layer attention probabilities
    or final hidden states, or when a tokenizer cannot map tokens back to
    character offsets (needed to locate target words).
    """


class ExportError(ExporterError):
    """The requested job cannot be written as a valid bundle.

    Covers empty tokenizations, base sentences longer than the allowed
    length or the model context, repeated text whose tokenization cannot
    be described as a k-fold repetition of the base sentence, and tensor
    payloads that fail the bundle validity contract.
    """


class QuestionFormatError(ExporterError):
    """A question file line is not valid JSON or misses required fields."""
