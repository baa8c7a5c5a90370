"""Command-line front end for exporting bundles from pretrained models.

Subcommands:

* ``export``: tokenize a text, repeat it k times, run one forward pass of
  a causal language model with attention recording, and write a ``.reba``
  bundle the embedding engine can consume.
* ``manifest``: read a JSON-lines question file (target word, four option
  sentences, gold answer), export four bundles per question, and write
  the manifest the engine's ``eval four-choice`` command takes.

Exit codes: 0 success, 1 usage, 2 question-file format error, 3 export or
model-capability error, 4 I/O error (including models that cannot be
loaded). Errors print a human-readable message to stderr; with ``--json``
a machine-readable error document goes to stdout. Progress notes (token
counts, truncation, skipped questions) go to stderr via logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ExporterError, QuestionFormatError
from .export import export_bundle, export_manifest, read_questions
from .jobs import DEFAULT_MAX_LEN, ExportJob, RepeatMode

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exceptions."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _configure_logging() -> None:
    pkg_logger = logging.getLogger("reba_exporter")
    if not pkg_logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(
            logging.Formatter("reba-export: %(levelname)s: %(message)s")
        )
        pkg_logger.addHandler(handler)
    pkg_logger.setLevel(logging.INFO)


def _job_from_args(args, text: str) -> ExportJob:
    return ExportJob(
        model=args.model,
        text=text,
        repetitions=args.repeat,
        max_len=args.max_len,
        mode=RepeatMode(args.mode),
    )


def _cmd_export(args) -> tuple[str, str]:
    header = export_bundle(_job_from_args(args, args.text), args.out)
    doc = {
        "out": args.out,
        "model_tag": header.model_tag,
        "layers": header.layers,
        "heads": header.heads,
        "seq_len": header.seq_len,
        "hidden": header.hidden,
        "base_len": header.base_len,
        "repetitions": header.repetitions,
        "truncated": header.truncated,
        "notes": header.notes,
    }
    human = (
        f"wrote {args.out}: m={header.seq_len} tokens "
        f"(n={header.base_len} x k={header.repetitions}), "
        f"layers={header.layers}, heads={header.heads}, "
        f"hidden={header.hidden}, truncated={str(header.truncated).lower()}"
    )
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False), human


def _cmd_manifest(args) -> tuple[str, str]:
    questions = read_questions(args.questions)
    summary = export_manifest(
        questions,
        _job_from_args(args, ""),
        args.out_dir,
        manifest_name=args.manifest_name,
    )
    doc = {
        "manifest": summary.manifest_path,
        "questions": summary.written,
        "bundles": summary.bundles,
        "skipped": [
            {"question_id": s.question_id, "reason": s.reason}
            for s in summary.skipped
        ],
    }
    human = (
        f"wrote {summary.manifest_path}: {summary.written} questions "
        f"({summary.bundles} bundles), {len(summary.skipped)} skipped"
    )
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False), human


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--quiet",
        action="store_true",
        default=argparse.SUPPRESS,
        help="suppress the success line on stdout",
    )
    common.add_argument(
        "--json",
        action="store_true",
        default=argparse.SUPPRESS,
        help="print a machine-readable result document to stdout",
    )

    parser = _Parser(
        prog="reba-export",
        description=(
            "Export repeated-sequence attention bundles from pretrained "
            "causal language models."
        ),
        parents=[common],
    )
    parser.set_defaults(quiet=False, json=False)
    sub = parser.add_subparsers(dest="command", metavar="command")

    model_args = _Parser(add_help=False)
    model_args.add_argument(
        "--model", required=True, help="model identifier: a name or a local path"
    )
    model_args.add_argument(
        "--repeat", type=int, default=1, help="repetition count k (default 1)"
    )
    model_args.add_argument(
        "--max-len",
        type=int,
        default=DEFAULT_MAX_LEN,
        help=f"maximum total sequence length (default {DEFAULT_MAX_LEN})",
    )
    model_args.add_argument(
        "--mode",
        choices=[mode.value for mode in RepeatMode],
        default=RepeatMode.TOKENIZE_THEN_REPEAT.value,
        help="how the repeated sequence is produced (default %(default)s)",
    )

    p_export = sub.add_parser(
        "export",
        parents=[common, model_args],
        help="export one text as a bundle file",
    )
    p_export.add_argument("--text", required=True, help="input text to embed")
    p_export.add_argument("--out", required=True, help="output bundle path")
    p_export.set_defaults(handler=_cmd_export)

    p_manifest = sub.add_parser(
        "manifest",
        parents=[common, model_args],
        help="export four-choice questions as bundles plus a manifest",
    )
    p_manifest.add_argument(
        "--questions",
        required=True,
        help="JSON-lines question file (word, options, gold)",
    )
    p_manifest.add_argument(
        "--out-dir", required=True, help="directory for bundles and manifest"
    )
    p_manifest.add_argument(
        "--manifest-name",
        default="manifest.jsonl",
        help="manifest filename inside the output directory (default %(default)s)",
    )
    p_manifest.set_defaults(handler=_cmd_manifest)
    return parser


def _emit_error(kind: str, message: str, json_mode: bool) -> None:
    print(f"reba-export: {kind} error: {message}", file=sys.stderr)
    if json_mode:
        print(json.dumps({"error": kind, "message": message}))


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    json_mode = "--json" in argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _emit_error("usage", str(exc), json_mode)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    if getattr(args, "handler", None) is None:
        _emit_error("usage", "reba-export: a command is required", json_mode)
        return 1

    _configure_logging()
    json_mode = getattr(args, "json", False)
    quiet = getattr(args, "quiet", False)
    try:
        payload, human = args.handler(args)
    except _UsageError as exc:
        _emit_error("usage", str(exc), json_mode)
        return 1
    except QuestionFormatError as exc:
        _emit_error("format", str(exc), json_mode)
        return 2
    except ExporterError as exc:
        _emit_error("export", str(exc), json_mode)
        return 3
    except OSError as exc:
        _emit_error("io", str(exc), json_mode)
        return 4

    if json_mode:
        print(payload)
    elif not quiet:
        print(human)
    return 0


if __name__ == "__main__":
    sys.exit(main())
