"""Model loading and attention-recording forward passes.

A :class:`ModelRunner` wraps one pretrained causal language model and its
tokenizer. Loading forces the eager attention implementation because the
whole point of the export is the per-layer, per-head attention
probabilities, and fused attention kernels do not materialize them.

Runners are cached per process (:func:`get_runner`): one model instance
per process, jobs within a process run sequentially on it, and separate
processes exporting to distinct files need no coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import CapabilityError

__all__ = ["ForwardRecord", "ModelRunner", "get_runner"]


@dataclass(frozen=True)
class ForwardRecord:
    """Tensors captured from one forward pass.

    ``attentions`` has shape (layers, heads, m, m); ``hidden_states`` is
    the final layer's output, shape (m, hidden). Both are float32.
    """

    attentions: np.ndarray
    hidden_states: np.ndarray


class ModelRunner:
    """One loaded model + tokenizer, ready to record forward passes."""

    def __init__(self, model, tokenizer, model_id: str):
        self.model = model
        self.tokenizer = tokenizer
        self.model_id = str(model_id)
        self.model.eval()
        context = getattr(self.model.config, "max_position_embeddings", None)
        self.context_length: int | None = int(context) if context else None

    @classmethod
    def from_pretrained(cls, model_id: str) -> "ModelRunner":
        """Load a causal LM and tokenizer by identifier (name or path)."""
        from transformers import AutoModelForCausalLM, AutoTokenizer
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
        try:
            tokenizer = AutoTokenizer.from_pretrained(model_id)
            model = AutoModelForCausalLM.from_pretrained(
                model_id, attn_implementation="eager"
            )
        except (OSError, ValueError) as exc:
            raise OSError(f"cannot load model {model_id!r}: {exc}") from exc
        return cls(model, tokenizer, model_id)

    def encode(self, text: str) -> list[int]:
        """Token ids for ``text`` with no special tokens added.

        Special tokens are suppressed so the repeated sequence is exactly
        k copies of the base ids, with nothing injected between copies.
        """
        return list(self.tokenizer(text, add_special_tokens=False)["input_ids"])

    def encode_with_offsets(
        self, text: str
    ) -> tuple[list[int], list[tuple[int, int]]]:
        """Token ids plus their character spans within ``text``.

        Offsets are needed to locate a target word's tokens; tokenizers
        without offset support cannot drive manifest exports.
        """
        if not getattr(self.tokenizer, "is_fast", False):
            raise CapabilityError(
                f"tokenizer for {self.model_id!r} cannot report character "
                "offsets, which locating target words requires"
            )
        enc = self.tokenizer(
            text, add_special_tokens=False, return_offsets_mapping=True
        )
        ids = list(enc["input_ids"])
        offsets = [(int(a), int(b)) for a, b in enc["offset_mapping"]]
        return ids, offsets

    def run(self, token_ids: list[int]) -> ForwardRecord:
        """Run one forward pass and capture attentions and hidden states."""
        batch = torch.tensor([list(token_ids)], dtype=torch.long)
        with torch.no_grad():
            out = self.model(
                batch, output_attentions=True, output_hidden_states=True
            )
        atts = getattr(out, "attentions", None)
        if atts is None or len(atts) == 0 or any(a is None for a in atts):
            raise CapabilityError(
                f"model {self.model_id!r} did not report attention "
                "probabilities; it cannot drive this export"
            )
        hiddens = getattr(out, "hidden_states", None)
        if hiddens is None or len(hiddens) == 0 or hiddens[-1] is None:
            raise CapabilityError(
                f"model {self.model_id!r} did not report hidden states; "
                "it cannot drive this export"
            )
        try:
            attentions = np.stack(
                [a[0].to(torch.float32).cpu().numpy() for a in atts]
            )
        except ValueError as exc:
            raise CapabilityError(
                f"model {self.model_id!r} reported attention matrices with "
                f"inconsistent shapes: {exc}"
            ) from exc
        hidden = hiddens[-1][0].to(torch.float32).cpu().numpy()
        return ForwardRecord(attentions=attentions, hidden_states=hidden)


_RUNNERS: dict[str, ModelRunner] = {}


def get_runner(model_id: str) -> ModelRunner:
    """Return the process-wide runner for ``model_id``, loading it once."""
    key = str(model_id)
    if key not in _RUNNERS:
        _RUNNERS[key] = ModelRunner.from_pretrained(key)
    return _RUNNERS[key]
