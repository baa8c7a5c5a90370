"""Shared fixtures: tiny local causal models saved to disk.

The tests need real ``transformers`` models without touching the network,
so they build miniature randomly-initialized GPT-2 variants (2 layers,
2 heads, 32 dims, 64-token context) and save them next to purpose-built
tokenizers:

* ``model_dir``: a whole-word tokenizer over a small closed vocabulary —
  repeating text with a space reproduces the token sequence exactly;
* ``merge_model_dir``: a byte-pair tokenizer whose merges swallow the
  space between copies, so repeated text tokenizes to the same length
  but different ids (alignment breaks);
* ``split_model_dir``: a byte-pair tokenizer that keeps the separating
  space as its own token, so repeated text tokenizes to more tokens than
  k copies of the base (not representable as a k-fold repetition).

All three share one set of model weights; only the tokenizer differs.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast
from transformers.utils import logging as hf_logging

VOCAB_WORDS = [
    "the", "a", "cat", "dog", "bird", "fish", "sat", "ran", "flew", "swam",
    "on", "in", "under", "over", "mat", "rug", "log", "tree", "sky", "sea",
    "sun", "moon", "red", "blue", "big", "small", "happy", "sad", "fast",
    "slow", "bank", "river",
]

CONTEXT_LEN = 64


@pytest.fixture(scope="session", autouse=True)
def _quiet_transformers():
    hf_logging.disable_progress_bar()
    hf_logging.set_verbosity_error()


def _save_model_with_tokenizer(directory: Path, tokenizer: PreTrainedTokenizerFast) -> str:
    config = GPT2Config(
        vocab_size=64,
        n_positions=CONTEXT_LEN,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=0,
        eos_token_id=0,
    )
    torch.manual_seed(7)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    """Tiny model with a whole-word tokenizer over VOCAB_WORDS."""
    vocab = {word: index for index, word in enumerate(VOCAB_WORDS)}
    vocab["[UNK]"] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]")
    return _save_model_with_tokenizer(tmp_path_factory.mktemp("word-model"), fast)


@pytest.fixture(scope="session")
def merge_model_dir(tmp_path_factory) -> str:
    """Tokenizer that merges 'ab '+'ab' so copies misalign but keep length.

    'ab' -> [3]; 'ab ab' -> [4, 3]: two tokens for two copies, but the
    first one differs from the base copy's single token.
    """
    tok = Tokenizer(
        models.BPE(
            vocab={"a": 0, "b": 1, " ": 2, "ab": 3, "ab ": 4},
            merges=[("a", "b"), ("ab", " ")],
        )
    )
    fast = PreTrainedTokenizerFast(tokenizer_object=tok)
    return _save_model_with_tokenizer(tmp_path_factory.mktemp("merge-model"), fast)


@pytest.fixture(scope="session")
def split_model_dir(tmp_path_factory) -> str:
    """Tokenizer that keeps the joining space as its own token.

    'ab' -> [3]; 'ab ab' -> [3, 2, 3]: three tokens, more than two copies
    of the one-token base, so a 2-fold repetition cannot describe it.
    """
    tok = Tokenizer(
        models.BPE(vocab={"a": 0, "b": 1, " ": 2, "ab": 3}, merges=[("a", "b")])
    )
    fast = PreTrainedTokenizerFast(tokenizer_object=tok)
    return _save_model_with_tokenizer(tmp_path_factory.mktemp("split-model"), fast)


@pytest.fixture(scope="session")
def runner(model_dir):
    from reba_exporter import get_runner

    return get_runner(model_dir)


@pytest.fixture(scope="session")
def read_raw():
    """The raw-bundle parser as a fixture, usable from any test module."""
    return read_bundle_raw


def read_bundle_raw(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Parse a bundle file directly from its documented byte layout.

    Independent of both the exporter's writer and the engine's reader, so
    tests can check what actually landed on disk.
    """
    raw = Path(path).read_bytes()
    assert raw[:8] == b"REBABNDL", "bundle must start with the format magic"
    (header_len,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    layers, heads = header["layers"], header["heads"]
    m, d = header["seq_len"], header["hidden"]
    att_bytes = 4 * layers * heads * m * m
    att = np.frombuffer(raw[offset : offset + att_bytes], dtype="<f4")
    att = att.reshape(layers, heads, m, m)
    offset += att_bytes
    hid = np.frombuffer(raw[offset : offset + 4 * m * d], dtype="<f4").reshape(m, d)
    assert offset + 4 * m * d == len(raw), "bundle must end exactly after payloads"
    return header, att, hid
