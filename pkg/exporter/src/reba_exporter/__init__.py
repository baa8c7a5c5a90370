"""Bridge pretrained causal language models to the embedding engine.

This package tokenizes text, repeats the sequence k times, runs one
forward pass with attention recording enabled, and writes the engine's
binary bundle format. It talks to the engine exclusively through that
file format and the JSON-lines manifest — it never imports the engine and
never computes embeddings itself.
"""

from .bundleio import (
    BUNDLE_VERSION,
    CAUSALITY_TOLERANCE,
    HEADER_KEY_ORDER,
    MAGIC,
    RANGE_TOLERANCE,
    ROW_SUM_TOLERANCE,
    BundleHeader,
    bundle_bytes,
    header_json_bytes,
    write_bundle,
)
from .errors import CapabilityError, ExporterError, ExportError, QuestionFormatError
from .export import (
    ManifestQuestion,
    ManifestSummary,
    SkippedQuestion,
    export_bundle,
    export_manifest,
    locate_target_token,
    read_questions,
    repetition_aligned,
)
from .jobs import DEFAULT_MAX_LEN, ExportJob, RepeatMode
from .runner import ForwardRecord, ModelRunner, get_runner

__version__ = "0.1.0"

__all__ = [
    "BUNDLE_VERSION",
    "CAUSALITY_TOLERANCE",
    "DEFAULT_MAX_LEN",
    "HEADER_KEY_ORDER",
    "MAGIC",
    "RANGE_TOLERANCE",
    "ROW_SUM_TOLERANCE",
    "BundleHeader",
    "CapabilityError",
    "ExportError",
    "ExportJob",
    "ExporterError",
    "ForwardRecord",
    "ManifestQuestion",
    "ManifestSummary",
    "ModelRunner",
    "QuestionFormatError",
    "RepeatMode",
    "SkippedQuestion",
    "bundle_bytes",
    "export_bundle",
    "export_manifest",
    "get_runner",
    "header_json_bytes",
    "locate_target_token",
    "read_questions",
    "repetition_aligned",
    "write_bundle",
    "__version__",
]
