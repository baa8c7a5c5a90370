"""Evaluation protocols: four-choice word discrimination and basic metrics.

The four-choice task presents one polysemous word in four sentences, three
of which use the same sense. Each option is embedded at the target word and
the odd one out is the option whose summed distance to the other three is
largest. Ties break to the smallest option index so reports are
reproducible. Under cosine distance a zero-norm embedding cannot be scored,
so a fixed substitute distance of 1 to every other option is used and the
option is flagged in the report rather than aborting the run.

Manifests are JSON lines, one question per line, with fields question_id,
options (four bundle paths), target_token_index (four 1-based ints), gold
(1..4). Reports are a single JSON document: config echo, per-question rows,
aggregate accuracy.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bundle import TensorBundle, read_bundle
from .embed import EchoMeanMode, EmbedRequest, Method, Pooling, compute_embedding
from .errors import (
    DegenerateStatisticsError,
    DegenerateVectorError,
    FormatError,
    ValidationError,
)
from .fusion import FusionStrategy, fuse

__all__ = [
    "Distance",
    "EvalQuestion",
    "FourChoiceResult",
    "FourChoiceConfig",
    "QuestionResult",
    "EvalReport",
    "euclidean",
    "cosine_similarity",
    "four_choice_answer",
    "accuracy",
    "pearson",
    "recall_at_k",
    "read_manifest",
    "write_manifest",
    "run_four_choice_eval",
]


class Distance(str, Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"


def _as_f64_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


def euclidean(u, v) -> float:
    """sqrt(sum((u_i - v_i)^2)) accumulated in float64."""
    u = _as_f64_vector(u, "u")
    v = _as_f64_vector(v, "v")
    if u.shape != v.shape:
        raise ValidationError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    diff = u - v
    return float(math.sqrt(np.dot(diff, diff)))


def cosine_similarity(u, v) -> float:
    """(u . v) / (|u| |v|); zero-norm inputs are the caller's policy problem."""
    u = _as_f64_vector(u, "u")
    v = _as_f64_vector(v, "v")
    if u.shape != v.shape:
        raise ValidationError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(np.dot(u, u))
    nv = math.sqrt(np.dot(v, v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine similarity is undefined for a zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


@dataclass(frozen=True)
class FourChoiceResult:
    """Chosen option (1-based), full 4x4 distance table, degeneracy flags."""

    chosen: int
    distances: np.ndarray
    degenerate: tuple[bool, bool, bool, bool]

    def __post_init__(self):
        table = np.ascontiguousarray(self.distances, dtype=np.float64)
        table.setflags(write=False)
        object.__setattr__(self, "distances", table)


def four_choice_answer(embeddings, distance: Distance) -> FourChoiceResult:
    """Pick the option with the largest summed distance to the other three.

    Cosine distance is 1 - cosine similarity. Ties break to the smallest
    index. Under cosine, a zero-norm option gets distance 1 to every other
    option and its flag set; under Euclidean the ordinary formula applies
    to every vector, zero or not, and no flags are set.
    """
    distance = Distance(distance)
    vectors = [_as_f64_vector(v, f"option {i + 1}") for i, v in enumerate(embeddings)]
    if len(vectors) != 4:
        raise ValidationError(f"four-choice scoring needs exactly 4 vectors, got {len(vectors)}")
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise ValidationError(f"options have mismatched dimensions: {sorted(dims)}")

    degenerate = [False, False, False, False]
    if distance is Distance.COSINE:
        degenerate = [not np.any(v) for v in vectors]

    table = np.zeros((4, 4), dtype=np.float64)
    for a in range(4):
        for b in range(a + 1, 4):
            if distance is Distance.EUCLIDEAN:
                value = euclidean(vectors[a], vectors[b])
            elif degenerate[a] or degenerate[b]:
                value = 1.0
            else:
                value = 1.0 - cosine_similarity(vectors[a], vectors[b])
            table[a, b] = table[b, a] = value

    sums = table.sum(axis=1)
    chosen = int(np.argmax(sums)) + 1  # first max wins: smallest-index tie-break
    return FourChoiceResult(chosen=chosen, distances=table, degenerate=tuple(degenerate))


def accuracy(chosen, gold) -> float:
    """Fraction of positions where chosen matches gold."""
    chosen = list(chosen)
    gold = list(gold)
    if not chosen or not gold:
        raise ValidationError("accuracy needs at least one prediction")
    if len(chosen) != len(gold):
        raise ValidationError(f"length mismatch: {len(chosen)} predictions vs {len(gold)} golds")
    correct = sum(1 for c, g in zip(chosen, gold) if c == g)
    return correct / len(gold)


def pearson(x, y) -> float:
    """Centered product-moment correlation, accumulated in float64."""
    x = _as_f64_vector(x, "x")
    y = _as_f64_vector(y, "y")
    if x.shape != y.shape:
        raise ValidationError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.size < 2:
        raise ValidationError("correlation needs at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateStatisticsError("correlation is undefined when either input has zero variance")
    return float(np.dot(xc, yc) / math.sqrt(sxx * syy))


def recall_at_k(ranked_ids, relevant_ids, k: int) -> float:
    """|relevant intersect top-k| / |relevant|."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    relevant = set(relevant_ids)
    if not relevant:
        raise ValidationError("relevant set must be non-empty")
    top = set(list(ranked_ids)[:k])
    return len(relevant & top) / len(relevant)


@dataclass(frozen=True)
class EvalQuestion:
    """One four-choice item: four bundle files, one target token in each."""

    question_id: str
    options: tuple[str, str, str, str]
    target_token_index: tuple[int, int, int, int]
    gold: int

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(str(p) for p in self.options))
        object.__setattr__(self, "target_token_index", tuple(int(i) for i in self.target_token_index))
        if len(self.options) != 4:
            raise ValidationError(f"question {self.question_id}: needs exactly 4 options")
        if len(self.target_token_index) != 4:
            raise ValidationError(f"question {self.question_id}: needs exactly 4 target indices")
        if any(i < 1 for i in self.target_token_index):
            raise ValidationError(f"question {self.question_id}: target indices are 1-based")
        if self.gold not in (1, 2, 3, 4):
            raise ValidationError(f"question {self.question_id}: gold must be 1..4, got {self.gold}")

    def to_json_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "options": list(self.options),
            "target_token_index": list(self.target_token_index),
            "gold": self.gold,
        }


def read_manifest(path) -> list[EvalQuestion]:
    """Parse a JSON-lines manifest; blank lines are ignored."""
    questions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            try:
                question = EvalQuestion(
                    question_id=str(record["question_id"]),
                    options=tuple(record["options"]),
                    target_token_index=tuple(record["target_token_index"]),
                    gold=int(record["gold"]),
                )
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing field {exc}") from exc
            except (TypeError, ValueError, ValidationError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            questions.append(question)
    return questions


def write_manifest(questions, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q.to_json_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class FourChoiceConfig:
    """Everything needed to embed a target token the same way per option."""

    method: Method
    pool: Pooling = Pooling.WORD
    k: int = 1
    distance: Distance = Distance.EUCLIDEAN
    strategy: FusionStrategy = FusionStrategy.MAX_ALL_LAYERS
    echo_mean_mode: EchoMeanMode = EchoMeanMode.LAST_OCCURRENCE
    normalize_weights: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "pool", Pooling(self.pool))
        object.__setattr__(self, "distance", Distance(self.distance))
        object.__setattr__(self, "strategy", FusionStrategy(self.strategy))
        object.__setattr__(self, "echo_mean_mode", EchoMeanMode(self.echo_mean_mode))
        if self.pool is not Pooling.WORD:
            raise ValidationError("four-choice scoring embeds the target word; pool must be 'word'")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method.value,
            "pool": self.pool.value,
            "k": self.k,
            "distance": self.distance.value,
            "strategy": self.strategy.value,
            "echo_mean_mode": self.echo_mean_mode.value,
            "normalize_weights": self.normalize_weights,
        }


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    chosen: int
    gold: int
    correct: bool
    distances: tuple
    degenerate: tuple[bool, bool, bool, bool]

    def to_json_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "chosen": self.chosen,
            "gold": self.gold,
            "correct": self.correct,
            "distances": [list(row) for row in self.distances],
            "degenerate": list(self.degenerate),
        }


@dataclass(frozen=True)
class EvalReport:
    config: FourChoiceConfig
    questions: tuple[QuestionResult, ...]
    accuracy: float

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "questions": [q.to_json_dict() for q in self.questions],
            "accuracy": self.accuracy,
        }


def _embed_option(bundle: TensorBundle, config: FourChoiceConfig, token_index: int, where: str):
    if token_index > bundle.header.base_len:
        raise ValidationError(
            f"{where}: target token {token_index} exceeds base length {bundle.header.base_len}"
        )
    request = EmbedRequest(
        method=config.method,
        pool=Pooling.WORD,
        k=config.k,
        token_index=token_index,
        echo_mean_mode=config.echo_mean_mode,
        normalize_weights=config.normalize_weights,
    )
    fused = None
    if config.method is Method.REBA:
        fused = fuse(bundle.attentions, config.strategy)
    return compute_embedding(bundle, request, fused)


def run_four_choice_eval(questions, config: FourChoiceConfig) -> EvalReport:
    """Score every manifest question and aggregate accuracy.

    Questions are independent; results are assembled in manifest order.
    A missing bundle file aborts the run with an error naming the
    question, while degenerate embeddings are flagged per option and
    scoring continues.
    """
    questions = list(questions)
    if not questions:
        raise ValidationError("manifest contains no questions")

    rows = []
    for q in questions:
        vectors = []
        for option_path, token_index in zip(q.options, q.target_token_index):
            where = f"question {q.question_id}, option {os.fspath(option_path)}"
            try:
                bundle = read_bundle(option_path)
            except OSError as exc:
                raise OSError(f"{where}: {exc}") from exc
            embedding = _embed_option(bundle, config, token_index, where)
            vectors.append(embedding.values)
        result = four_choice_answer(vectors, config.distance)
        rows.append(
            QuestionResult(
                question_id=q.question_id,
                chosen=result.chosen,
                gold=q.gold,
                correct=result.chosen == q.gold,
                distances=tuple(tuple(float(x) for x in row) for row in result.distances),
                degenerate=result.degenerate,
            )
        )

    overall = accuracy([r.chosen for r in rows], [r.gold for r in rows])
    return EvalReport(config=config, questions=tuple(rows), accuracy=overall)
