"""
Four-choice odd-one-out evaluation
==================================

The harness scores questions of the form: here are four sentences using
the same word, three in one sense and one in another; find the odd one
out. Each option is embedded at the target word and the option with the
largest summed distance to the other three wins. This demo plants the
odd sense as a visibly different token sequence, builds a manifest, and
runs both distance metrics.
"""

import json
from pathlib import Path
from tempfile import mkdtemp

from reba import (
    Distance,
    EvalQuestion,
    FourChoiceConfig,
    Method,
    ToyModelSpec,
    generate_bundle,
    run_four_choice_eval,
    write_bundle,
    write_manifest,
)

workdir = Path(mkdtemp(prefix="four_choice_"))

# Three options share a token sequence; the gold option (here option 3)
# uses a different one, so its target-word embedding stands apart.
questions = []
for qi in range(4):
    gold = (qi % 4) + 1
    paths = []
    for opt in range(4):
        tokens = [9, 9, 2, 9, 9] if opt + 1 == gold else [3, 1, 4, 1, 5]
        bundle = generate_bundle(ToyModelSpec(seed=7 + qi), tokens, k=2)
        path = workdir / f"q{qi}_option{opt + 1}.reba"
        write_bundle(bundle, path)
        paths.append(str(path))
    questions.append(EvalQuestion(question_id=f"q{qi}", options=tuple(paths),
                                  target_token_index=(3, 3, 3, 3), gold=gold))

manifest = workdir / "questions.jsonl"
write_manifest(questions, manifest)
print(f"manifest: {manifest} ({len(questions)} questions)")

# Score the same manifest under each method and metric combination.
for method, k in [(Method.CLASSICAL, 1), (Method.ECHO, 2), (Method.REBA, 2)]:
    for distance in Distance:
        config = FourChoiceConfig(method=method, k=k, distance=distance)
        report = run_four_choice_eval(questions, config)
        chosen = [q.chosen for q in report.questions]
        print(f"{method.value:9s} {distance.value:9s} "
              f"accuracy {report.accuracy:.2f}  chosen {chosen}")

# Reports serialize to a single JSON document with the config echoed back.
report = run_four_choice_eval(questions, FourChoiceConfig(method=Method.REBA, k=2))
doc = report.to_json_dict()
print("\nreport keys:", sorted(doc))
print("first question row:", json.dumps(doc["questions"][0])[:120], "...")
