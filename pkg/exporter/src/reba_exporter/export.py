"""Turn export jobs into bundle files and question files into manifests.

:func:`export_bundle` runs one job end to end: tokenize, repeat, cap the
length, run the model with attention recording, and write a bundle that
the engine will accept. :func:`export_manifest` drives it once per option
sentence of each four-choice question and writes the JSON-lines manifest
the engine's evaluation command consumes.

Length policy: the base sentence must fit both the job's maximum length
and the model context — otherwise the job is rejected, because a bundle
whose base copy is cut off cannot honour the format's length bounds. The
repeated sequence, by contrast, is simply truncated (flag set), with a
warning when the model context is what forced the cut.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path

from .bundleio import BundleHeader, write_bundle
from .errors import ExportError, QuestionFormatError
from .jobs import ExportJob, RepeatMode
from .runner import ModelRunner, get_runner

__all__ = [
    "ManifestQuestion",
    "SkippedQuestion",
    "ManifestSummary",
    "repetition_aligned",
    "locate_target_token",
    "read_questions",
    "export_bundle",
    "export_manifest",
]

logger = logging.getLogger(__name__)


def repetition_aligned(token_ids: list[int], base_len: int, k: int) -> bool:
    """True when ``token_ids`` is exactly k aligned copies of its first
    ``base_len`` entries — the invariant the default repeat mode guarantees
    and the text-repeat mode has to verify."""
    if base_len < 1 or len(token_ids) != k * base_len:
        return False
    return all(
        token_ids[i] == token_ids[i % base_len] for i in range(len(token_ids))
    )


def export_bundle(
    job: ExportJob,
    destination: str | os.PathLike,
    runner: ModelRunner | None = None,
) -> BundleHeader:
    """Export one job to ``destination`` and return the written header.

    Raises :class:`ExportError` when the job cannot be represented as a
    valid bundle and :class:`CapabilityError` when the model cannot report
    the tensors the export needs. On error no file is written.
    """
    runner = runner or get_runner(job.model)
    base_ids = runner.encode(job.text)
    n = len(base_ids)
    if n == 0:
        raise ExportError(f"text {job.text!r} tokenized to zero tokens")

    k = job.repetitions
    context = runner.context_length
    cap = job.max_len if context is None else min(job.max_len, context)
    if n > cap:
        if context is not None and n > context:
            raise ExportError(
                f"base sentence alone is {n} tokens, exceeding the model "
                f"context of {context}"
            )
        raise ExportError(
            f"base sentence alone is {n} tokens, exceeding the maximum "
            f"length of {job.max_len}"
        )

    notes = [f"mode={job.mode.value}"]
    if job.mode is RepeatMode.TOKENIZE_THEN_REPEAT:
        ids = list(base_ids) * k
        aligned = True
    else:
        joined = " ".join([job.text] * k)
        ids = runner.encode(joined)
        aligned = repetition_aligned(ids, n, k)
        logger.info(
            "text-repeat tokenization: base %d tokens, joined %d tokens (k=%d, aligned=%s)",
            n, len(ids), k, aligned,
        )
        notes.append(f"base_tokens={n}")
        notes.append(f"joined_tokens={len(ids)}")
        notes.append(f"aligned={str(aligned).lower()}")

    truncated = not aligned
    if len(ids) > cap:
        if context is not None and len(ids) > context:
            logger.warning(
                "sequence of %d tokens exceeds the model context of %d; truncating",
                len(ids), context,
            )
        ids = ids[:cap]
        truncated = True
        notes.append(f"truncated_to={cap}")

    m = len(ids)
    if not n <= m <= k * n:
        raise ExportError(
            f"joined text tokenized to {m} tokens, outside the {n}..{k * n} "
            f"range a {k}-fold repetition of a {n}-token base can occupy"
        )

    record = runner.run(ids)
    layers, heads = record.attentions.shape[0], record.attentions.shape[1]
    header = BundleHeader(
        layers=layers,
        heads=heads,
        seq_len=m,
        hidden=record.hidden_states.shape[1],
        base_len=n,
        repetitions=k,
        token_ids=tuple(ids),
        truncated=truncated,
        model_tag=runner.model_id,
        notes=";".join(notes),
    )
    write_bundle(destination, header, record.attentions, record.hidden_states)
    return header


@dataclass(frozen=True)
class ManifestQuestion:
    """One four-choice question: a target word, four sentences, the answer."""

    question_id: str
    word: str
    options: tuple[str, str, str, str]
    gold: int

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(str(s) for s in self.options))
        if not str(self.word):
            raise QuestionFormatError(
                f"question {self.question_id}: target word must be non-empty"
            )
        if len(self.options) != 4:
            raise QuestionFormatError(
                f"question {self.question_id}: needs exactly 4 option "
                f"sentences, got {len(self.options)}"
            )
        if self.gold not in (1, 2, 3, 4):
            raise QuestionFormatError(
                f"question {self.question_id}: gold must be 1..4, got {self.gold}"
            )


@dataclass(frozen=True)
class SkippedQuestion:
    """A question left out of the manifest, and why."""

    question_id: str
    reason: str


@dataclass(frozen=True)
class ManifestSummary:
    """What a manifest export produced."""

    manifest_path: str
    written: int
    bundles: int
    skipped: tuple[SkippedQuestion, ...]


def read_questions(path: str | os.PathLike) -> tuple[ManifestQuestion, ...]:
    """Read a JSON-lines question file.

    Each line is an object with ``word`` (target word), ``options`` (four
    sentences), ``gold`` (1..4), and an optional ``question_id`` (defaults
    to ``q<lineno>``). Blank lines are ignored.
    """
    questions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{os.fspath(path)}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise QuestionFormatError(f"{where}: not valid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise QuestionFormatError(f"{where}: each line must be a JSON object")
            try:
                question = ManifestQuestion(
                    question_id=str(record.get("question_id", f"q{lineno}")),
                    word=str(record["word"]),
                    options=tuple(record["options"]),
                    gold=int(record["gold"]),
                )
            except KeyError as exc:
                raise QuestionFormatError(f"{where}: missing field {exc}") from exc
            except (TypeError, ValueError) as exc:
                raise QuestionFormatError(f"{where}: {exc}") from exc
            except QuestionFormatError as exc:
                raise QuestionFormatError(f"{where}: {exc}") from exc
            questions.append(question)
    return tuple(questions)


def locate_target_token(
    text: str, word: str, offsets: list[tuple[int, int]]
) -> int | None:
    """1-based index of the token that ends the word's first occurrence.

    The word is matched as a whole word (not inside a longer one). Of the
    tokens whose character spans overlap the match, the last one is
    returned: in a causal model the final subword is the one that has seen
    the entire word. Returns None when the word does not occur.
    """
    pattern = rf"(?<!\w){re.escape(word)}(?!\w)"
    match = re.search(pattern, text)
    if match is None:
        return None
    start, end = match.span()
    last = None
    for index, (s, e) in enumerate(offsets):
        if s < end and e > start and e > s:
            last = index
    return None if last is None else last + 1


def _safe_filename(question_id: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9_.-]+", "_", question_id)
    return cleaned or "q"


def export_manifest(
    questions: tuple[ManifestQuestion, ...],
    job: ExportJob,
    out_dir: str | os.PathLike,
    runner: ModelRunner | None = None,
    manifest_name: str = "manifest.jsonl",
) -> ManifestSummary:
    """Export four bundles per question plus the manifest that lists them.

    ``job`` acts as a template: its model, repeat count, length cap and
    mode apply to every option sentence. Questions whose target word
    cannot be located in all four options are skipped with a logged
    reason; their bundles are not written. Bundle paths in the manifest
    keep the caller's ``out_dir`` prefix, so the manifest is consumable
    from the directory the caller exported from.
    """
    runner = runner or get_runner(job.model)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = []
    skipped = []
    for q in questions:
        indices = []
        reason = None
        for opt_no, sentence in enumerate(q.options, start=1):
            _, offsets = runner.encode_with_offsets(sentence)
            index = locate_target_token(sentence, q.word, offsets)
            if index is None:
                reason = (
                    f"target word {q.word!r} not found in option {opt_no}: "
                    f"{sentence!r}"
                )
                break
            indices.append(index)
        if reason is not None:
            logger.warning("question %s skipped: %s", q.question_id, reason)
            skipped.append(SkippedQuestion(q.question_id, reason))
            continue

        paths = []
        for opt_no, sentence in enumerate(q.options, start=1):
            dest = out / f"{_safe_filename(q.question_id)}_opt{opt_no}.reba"
            export_bundle(job.with_text(sentence), dest, runner=runner)
            paths.append(os.fspath(dest))
        lines.append(
            {
                "question_id": q.question_id,
                "options": paths,
                "target_token_index": indices,
                "gold": q.gold,
            }
        )

    manifest_path = out / manifest_name
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in lines:
            fh.write(json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n")
    logger.info(
        "manifest %s: %d questions written, %d skipped",
        manifest_path, len(lines), len(skipped),
    )
    return ManifestSummary(
        manifest_path=os.fspath(manifest_path),
        written=len(lines),
        bundles=4 * len(lines),
        skipped=tuple(skipped),
    )
