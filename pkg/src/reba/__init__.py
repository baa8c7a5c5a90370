"""Repetition-based embeddings from causal language model internals.

A causal language model reads left to right, so the hidden state of an
early token never sees the rest of the sentence. This package implements a
training-free fix: run the model on the sentence repeated k times, fuse all
recorded attention matrices into one symmetric matrix by elementwise
maximum, and re-aggregate hidden states with backward attention weights so
every token's embedding draws on the full sentence. Echo (read states from
the last repetition) and classical (first-pass states) baselines, a
deterministic toy transformer for self-contained tests, a binary bundle
format for model outputs, and an evaluation harness are included.
"""

from .bundle import (
    BundleHeader,
    TensorBundle,
    Violation,
    read_bundle,
    validate_bundle,
    write_bundle,
)
from .embed import (
    EchoMeanMode,
    EmbedRequest,
    EmbeddingVector,
    Method,
    OpCounter,
    Pooling,
    classical_embedding,
    compute_embedding,
    echo_embedding,
    reba_sentence_embedding,
    reba_word_embedding,
    repeat_tokens,
)
from .errors import (
    DegenerateStatisticsError,
    DegenerateVectorError,
    FormatError,
    NumericError,
    RebaError,
    ValidationError,
)
from .evaluation import (
    Distance,
    EvalQuestion,
    EvalReport,
    FourChoiceConfig,
    FourChoiceResult,
    QuestionResult,
    accuracy,
    cosine_similarity,
    euclidean,
    four_choice_answer,
    pearson,
    read_manifest,
    recall_at_k,
    run_four_choice_eval,
    write_manifest,
)
from .fusion import (
    FusedAttention,
    FusionStrategy,
    column_weight_sums,
    fuse,
    read_fused_matrix,
    symmetrize,
    write_fused_matrix,
)
from .toymodel import (
    ToyModelSpec,
    ToyWeights,
    forward,
    forward_arrays,
    generate_bundle,
    init_model,
)

__version__ = "0.1.0"

__all__ = [
    "BundleHeader",
    "TensorBundle",
    "Violation",
    "read_bundle",
    "validate_bundle",
    "write_bundle",
    "EchoMeanMode",
    "EmbedRequest",
    "EmbeddingVector",
    "Method",
    "OpCounter",
    "Pooling",
    "classical_embedding",
    "compute_embedding",
    "echo_embedding",
    "reba_sentence_embedding",
    "reba_word_embedding",
    "repeat_tokens",
    "DegenerateStatisticsError",
    "DegenerateVectorError",
    "FormatError",
    "NumericError",
    "RebaError",
    "ValidationError",
    "Distance",
    "EvalQuestion",
    "EvalReport",
    "FourChoiceConfig",
    "FourChoiceResult",
    "QuestionResult",
    "accuracy",
    "cosine_similarity",
    "euclidean",
    "four_choice_answer",
    "pearson",
    "read_manifest",
    "recall_at_k",
    "run_four_choice_eval",
    "write_manifest",
    "FusedAttention",
    "FusionStrategy",
    "column_weight_sums",
    "fuse",
    "read_fused_matrix",
    "symmetrize",
    "write_fused_matrix",
    "ToyModelSpec",
    "ToyWeights",
    "forward",
    "forward_arrays",
    "generate_bundle",
    "init_model",
    "__version__",
]
