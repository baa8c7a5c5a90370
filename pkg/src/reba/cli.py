"""Command-line front end: bundle generation, fusion, embedding, evaluation.

Subcommands:

* ``toygen``: run the seeded toy transformer over a token-id sequence
  (optionally repeated) and write a ``.reba`` bundle.
* ``fuse``: read a bundle, fuse its attention stack, dump the matrix as
  two little-endian u32 dims followed by row-major float32.
* ``embed``: compute one embedding from a bundle and write it as JSON
  with 9-significant-digit decimals (round-trips float32 exactly), plus
  an optional raw float32 dump.
* ``eval four-choice``: score a JSON-lines manifest of four-option
  questions and write a JSON report.
* ``eval pearson``: correlate cosine similarities of embedding-file pairs
  against gold scores.

Exit codes: 0 success, 1 usage, 2 file-format error, 3 validation or
numeric error, 4 I/O error. Errors print a human-readable message to
stderr; with ``--json`` a machine-readable error document goes to stdout.
All outputs are deterministic: re-running a subcommand on identical
inputs produces byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bundle import read_bundle, write_bundle
from .embed import (
    EchoMeanMode,
    EmbeddingVector,
    EmbedRequest,
    Method,
    Pooling,
    compute_embedding,
)
from .errors import FormatError, NumericError, ValidationError
from .evaluation import (
    Distance,
    FourChoiceConfig,
    cosine_similarity,
    pearson,
    read_manifest,
    run_four_choice_eval,
)
from .fusion import FusionStrategy, fuse, write_fused_matrix
from .toymodel import ToyModelSpec, generate_bundle

__all__ = ["main"]

_DEFAULT_MAX_POS = 256


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exceptions."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _token_list(text: str) -> list[int]:
    parts = text.split()
    if not parts:
        raise argparse.ArgumentTypeError("needs at least one token id")
    try:
        return [int(p) for p in parts]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"token ids must be integers: {exc}") from exc


def _format_f32(value) -> str:
    """Decimal form with 9 significant digits; parses back to the same f32."""
    return format(float(np.float32(value)), ".9g")


def _embedding_json(embedding: EmbeddingVector) -> str:
    token_index = "null" if embedding.token_index is None else str(embedding.token_index)
    values = ", ".join(_format_f32(v) for v in embedding.values)
    return (
        "{"
        f'"method": {json.dumps(embedding.method.value)}, '
        f'"pool": {json.dumps(embedding.pool.value)}, '
        f'"k": {embedding.k}, '
        f'"token_index": {token_index}, '
        f'"dim": {embedding.dim}, '
        f'"values": [{values}]'
        "}"
    )


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def _cmd_toygen(args) -> tuple[str, str]:
    ids = args.tokens
    needed = args.repeat * len(ids)
    spec = ToyModelSpec(
        vocab=args.vocab,
        dim=args.dim,
        heads=args.heads,
        layers=args.layers,
        max_pos=max(_DEFAULT_MAX_POS, needed),
        seed=args.seed,
    )
    bundle = generate_bundle(spec, ids, args.repeat)
    nbytes = write_bundle(bundle, args.out)
    header = bundle.header
    payload = json.dumps(
        {
            "command": "toygen",
            "out": str(args.out),
            "bytes": nbytes,
            "seq_len": header.seq_len,
            "base_len": header.base_len,
            "repetitions": header.repetitions,
            "model_tag": header.model_tag,
        }
    )
    human = (
        f"wrote {args.out}: m={header.seq_len} (n={header.base_len}, "
        f"k={header.repetitions}), {nbytes} bytes"
    )
    return payload, human


def _cmd_fuse(args) -> tuple[str, str]:
    bundle = read_bundle(args.input_path)
    fused = fuse(bundle.attentions, FusionStrategy(args.strategy))
    out = args.out
    if out is None:
        source = Path(args.input_path)
        out = source.with_name(source.stem + ".fused.bin")
    nbytes = write_fused_matrix(fused, out)
    payload = json.dumps(
        {
            "command": "fuse",
            "in": str(args.input_path),
            "out": str(out),
            "strategy": fused.strategy.value,
            "rows": fused.size,
            "cols": fused.size,
            "bytes": nbytes,
        }
    )
    human = f"wrote {out}: {fused.size}x{fused.size} fused matrix ({fused.strategy.value}), {nbytes} bytes"
    return payload, human


def _cmd_embed(args) -> tuple[str, str]:
    method = Method(args.method)
    pool = Pooling(args.pool)
    if pool is Pooling.WORD and args.token_index is None:
        raise _UsageError("reba embed: --token-index is required with --pool word")
    if pool is not Pooling.WORD and args.token_index is not None:
        raise _UsageError("reba embed: --token-index only applies to --pool word")

    bundle = read_bundle(args.input_path)
    k = 1 if method is Method.CLASSICAL else bundle.header.repetitions
    request = EmbedRequest(
        method=method,
        pool=pool,
        k=k,
        token_index=args.token_index,
        echo_mean_mode=EchoMeanMode(args.echo_mean_mode),
        normalize_weights=args.normalize_weights,
    )
    fused = None
    if method is Method.REBA:
        fused = fuse(bundle.attentions, FusionStrategy(args.strategy))
    embedding = compute_embedding(bundle, request, fused)

    text = _embedding_json(embedding)
    _write_text(args.out, text)
    if args.raw_out is not None:
        with open(args.raw_out, "wb") as fh:
            fh.write(np.ascontiguousarray(embedding.values, dtype="<f4").tobytes())

    note = " [zero-weight]" if embedding.zero_weight else ""
    human = f"wrote {args.out}: {method.value}/{pool.value} k={k} dim={embedding.dim}{note}"
    return text, human


def _resolve_eval_k(args, questions) -> int:
    if args.k is not None:
        return args.k
    if Method(args.method) is Method.CLASSICAL:
        return 1
    first = read_bundle(questions[0].options[0])
    return first.header.repetitions


def _cmd_eval_four_choice(args) -> tuple[str, str]:
    questions = read_manifest(args.manifest)
    if not questions:
        raise ValidationError(f"manifest {args.manifest} contains no questions")
    config = FourChoiceConfig(
        method=Method(args.method),
        pool=Pooling(args.pool),
        k=_resolve_eval_k(args, questions),
        distance=Distance(args.distance),
        strategy=FusionStrategy(args.strategy),
        echo_mean_mode=EchoMeanMode(args.echo_mean_mode),
        normalize_weights=args.normalize_weights,
    )
    report = run_four_choice_eval(questions, config)
    text = json.dumps(report.to_json_dict(), indent=2, ensure_ascii=False)
    _write_text(args.report, text)
    human = f"wrote {args.report}: accuracy {report.accuracy:.4f} over {len(report.questions)} questions"
    return text, human


def _read_embedding_values(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "values" not in doc:
        raise FormatError(f"{path}: expected an embedding document with a 'values' field")
    values = doc["values"]
    if not isinstance(values, list) or not values:
        raise FormatError(f"{path}: 'values' must be a non-empty list")
    try:
        return np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: 'values' must be numeric: {exc}") from exc


def _read_pairs(path) -> list[dict]:
    pairs = []
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
            missing = [key for key in ("left", "right", "score") if key not in record]
            if missing:
                raise FormatError(f"{path}:{lineno}: missing fields: {', '.join(missing)}")
            if not isinstance(record["score"], (int, float)) or isinstance(record["score"], bool):
                raise FormatError(f"{path}:{lineno}: 'score' must be a number")
            pairs.append(
                {
                    "id": str(record["id"]) if "id" in record else f"pair-{lineno}",
                    "left": str(record["left"]),
                    "right": str(record["right"]),
                    "score": float(record["score"]),
                }
            )
    return pairs


def _cmd_eval_pearson(args) -> tuple[str, str]:
    pairs = _read_pairs(args.pairs)
    if not pairs:
        raise ValidationError(f"pairs file {args.pairs} contains no records")
    rows = []
    predicted = []
    gold = []
    for record in pairs:
        left = _read_embedding_values(record["left"])
        right = _read_embedding_values(record["right"])
        value = cosine_similarity(left, right)
        predicted.append(value)
        gold.append(record["score"])
        rows.append(
            {
                "id": record["id"],
                "left": record["left"],
                "right": record["right"],
                "cosine": value,
                "score": record["score"],
            }
        )
    coefficient = pearson(predicted, gold)
    doc = {
        "config": {"pairs": str(args.pairs), "distance": "cosine"},
        "count": len(rows),
        "pairs": rows,
        "pearson": coefficient,
    }
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    _write_text(args.report, text)
    human = f"wrote {args.report}: pearson {coefficient:.6f} over {len(rows)} pairs"
    return text, human


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress the human-readable summary line")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="print a machine-readable JSON result to stdout")

    parser = _Parser(prog="reba", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress the human-readable summary line")
    parser.add_argument("--json", action="store_true", help="print a machine-readable JSON result to stdout")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    toygen = commands.add_parser("toygen", parents=[common],
                                 help="generate a bundle with the seeded toy transformer")
    toygen.add_argument("--seed", type=int, default=42)
    toygen.add_argument("--layers", type=int, default=2)
    toygen.add_argument("--heads", type=int, default=2)
    toygen.add_argument("--dim", type=int, default=16)
    toygen.add_argument("--vocab", type=int, default=32)
    toygen.add_argument("--tokens", type=_token_list, required=True, metavar="IDS",
                        help="whitespace-separated token ids, e.g. \"3 1 4\"")
    toygen.add_argument("--repeat", type=int, default=1, metavar="K")
    toygen.add_argument("--out", required=True, metavar="F.reba")
    toygen.set_defaults(handler=_cmd_toygen)

    fuse_cmd = commands.add_parser("fuse", parents=[common],
                                   help="fuse a bundle's attention stack into one matrix")
    fuse_cmd.add_argument("--in", dest="input_path", required=True, metavar="F.reba")
    fuse_cmd.add_argument("--strategy", choices=[s.value for s in FusionStrategy],
                          default=FusionStrategy.MAX_ALL_LAYERS.value)
    fuse_cmd.add_argument("--out", default=None, metavar="A.bin",
                          help="default: input name with .fused.bin extension")
    fuse_cmd.set_defaults(handler=_cmd_fuse)

    embed = commands.add_parser("embed", parents=[common],
                                help="compute one embedding from a bundle")
    embed.add_argument("--in", dest="input_path", required=True, metavar="F.reba")
    embed.add_argument("--method", choices=[m.value for m in Method], required=True)
    embed.add_argument("--pool", choices=[p.value for p in Pooling], required=True)
    embed.add_argument("--token-index", type=int, default=None, metavar="I",
                       help="1-based position in the base sentence (word pooling only)")
    embed.add_argument("--echo-mean-mode", choices=[m.value for m in EchoMeanMode],
                       default=EchoMeanMode.LAST_OCCURRENCE.value)
    embed.add_argument("--strategy", choices=[s.value for s in FusionStrategy],
                       default=FusionStrategy.MAX_ALL_LAYERS.value)
    embed.add_argument("--normalize-weights", action="store_true",
                       help="rescale each token's attention weights to sum to 1")
    embed.add_argument("--out", required=True, metavar="vec.json")
    embed.add_argument("--raw-out", default=None, metavar="vec.f32",
                       help="also dump the vector as raw little-endian float32")
    embed.set_defaults(handler=_cmd_embed)

    evaluate = commands.add_parser("eval", parents=[common], help="run an evaluation protocol")
    eval_commands = evaluate.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)

    four = eval_commands.add_parser("four-choice", parents=[common],
                                    help="four-option odd-one-out scoring over a manifest")
    four.add_argument("--manifest", required=True, metavar="Q.jsonl")
    four.add_argument("--method", choices=[m.value for m in Method], required=True)
    four.add_argument("--pool", choices=[Pooling.WORD.value], default=Pooling.WORD.value)
    four.add_argument("--distance", choices=[d.value for d in Distance], required=True)
    four.add_argument("--k", type=int, default=None,
                      help="expected repetition count; default: read from the first bundle")
    four.add_argument("--strategy", choices=[s.value for s in FusionStrategy],
                      default=FusionStrategy.MAX_ALL_LAYERS.value)
    four.add_argument("--echo-mean-mode", choices=[m.value for m in EchoMeanMode],
                      default=EchoMeanMode.LAST_OCCURRENCE.value)
    four.add_argument("--normalize-weights", action="store_true")
    four.add_argument("--report", required=True, metavar="R.json")
    four.set_defaults(handler=_cmd_eval_four_choice)

    pearson_cmd = eval_commands.add_parser("pearson", parents=[common],
                                           help="correlate embedding-pair cosines with gold scores")
    pearson_cmd.add_argument("--pairs", required=True, metavar="P.jsonl",
                             help="JSON lines: {\"left\": vec.json, \"right\": vec.json, \"score\": s}")
    pearson_cmd.add_argument("--report", required=True, metavar="R.json")
    pearson_cmd.set_defaults(handler=_cmd_eval_pearson)

    return parser


def _emit_error(kind: str, message: str, json_mode: bool) -> None:
    print(f"reba: {kind} error: {message}", file=sys.stderr)
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

    json_mode = getattr(args, "json", False)
    quiet = getattr(args, "quiet", False)
    try:
        payload, human = args.handler(args)
    except _UsageError as exc:
        _emit_error("usage", str(exc), json_mode)
        return 1
    except FormatError as exc:
        _emit_error("format", str(exc), json_mode)
        return 2
    except ValidationError as exc:
        _emit_error("validation", str(exc), json_mode)
        return 3
    except NumericError as exc:
        _emit_error("numeric", str(exc), json_mode)
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
