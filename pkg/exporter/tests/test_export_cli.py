"""Command-line behaviour: flags, output documents, and exit codes.

These run ``main`` in-process so the session's cached model is reused;
console-script and subprocess behaviour is covered by the integration
tests.
"""

from __future__ import annotations

import json

from reba_exporter.cli import main

from test_manifest import GOOD_QUESTIONS, SKIPPED_QUESTION, write_questions


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsage:
    def test_no_command(self, capsys):
        code, _, err = run([], capsys)
        assert code == 1
        assert "usage error" in err

    def test_unknown_command(self, capsys):
        code, _, err = run(["frobnicate"], capsys)
        assert code == 1
        assert "usage error" in err

    def test_missing_required_flag(self, capsys):
        code, _, err = run(["export", "--model", "x", "--text", "y"], capsys)
        assert code == 1
        assert "--out" in err

    def test_invalid_mode_choice(self, capsys):
        code, _, err = run(
            [
                "export", "--model", "x", "--text", "y",
                "--mode", "shuffle", "--out", "z.reba",
            ],
            capsys,
        )
        assert code == 1
        assert "invalid choice" in err

    def test_help_exits_zero(self, capsys):
        assert run(["--help"], capsys)[0] == 0
        assert run(["export", "--help"], capsys)[0] == 0


class TestExportCommand:
    def test_writes_bundle_and_reports(self, model_dir, tmp_path, capsys):
        out = tmp_path / "cli.reba"
        code, stdout, _ = run(
            [
                "export", "--model", model_dir,
                "--text", "the cat sat on the mat",
                "--repeat", "2", "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        assert out.exists()
        assert "m=12 tokens (n=6 x k=2)" in stdout

    def test_json_document(self, model_dir, tmp_path, capsys):
        out = tmp_path / "cli.reba"
        code, stdout, _ = run(
            [
                "export", "--model", model_dir,
                "--text", "the cat sat", "--repeat", "2",
                "--out", str(out), "--json",
            ],
            capsys,
        )
        assert code == 0
        doc = json.loads(stdout)
        assert doc["base_len"] == 3
        assert doc["seq_len"] == 6
        assert doc["repetitions"] == 2
        assert doc["truncated"] is False
        assert doc["out"] == str(out)
        assert doc["model_tag"] == model_dir
        assert "mode=tokenize-then-repeat" in doc["notes"]

    def test_quiet_suppresses_stdout(self, model_dir, tmp_path, capsys):
        out = tmp_path / "cli.reba"
        code, stdout, _ = run(
            [
                "export", "--model", model_dir, "--text", "the cat",
                "--out", str(out), "--quiet",
            ],
            capsys,
        )
        assert code == 0
        assert stdout == ""

    def test_export_error_exits_3(self, model_dir, tmp_path, capsys):
        code, _, err = run(
            [
                "export", "--model", model_dir,
                "--text", "the cat sat on the mat",
                "--max-len", "4", "--out", str(tmp_path / "x.reba"),
            ],
            capsys,
        )
        assert code == 3
        assert "export error" in err
        assert "maximum length" in err

    def test_bad_repeat_exits_3(self, model_dir, tmp_path, capsys):
        code, _, err = run(
            [
                "export", "--model", model_dir, "--text", "the cat",
                "--repeat", "0", "--out", str(tmp_path / "x.reba"),
            ],
            capsys,
        )
        assert code == 3
        assert "repetitions" in err

    def test_missing_model_exits_4(self, tmp_path, capsys):
        code, _, err = run(
            [
                "export", "--model", str(tmp_path / "no-such-model"),
                "--text", "the cat", "--out", str(tmp_path / "x.reba"),
            ],
            capsys,
        )
        assert code == 4
        assert "io error" in err

    def test_json_error_document(self, model_dir, tmp_path, capsys):
        code, stdout, _ = run(
            [
                "export", "--model", model_dir,
                "--text", "the cat sat on the mat",
                "--max-len", "4", "--out", str(tmp_path / "x.reba"), "--json",
            ],
            capsys,
        )
        assert code == 3
        doc = json.loads(stdout)
        assert doc["error"] == "export"
        assert "maximum length" in doc["message"]


class TestManifestCommand:
    def test_end_to_end_with_skip(self, model_dir, tmp_path, capsys):
        questions = write_questions(
            tmp_path / "questions.jsonl", GOOD_QUESTIONS + [SKIPPED_QUESTION]
        )
        out_dir = tmp_path / "bundles"
        code, stdout, _ = run(
            [
                "manifest", "--model", model_dir,
                "--questions", str(questions),
                "--repeat", "2", "--out-dir", str(out_dir), "--json",
            ],
            capsys,
        )
        assert code == 0
        doc = json.loads(stdout)
        assert doc["questions"] == 3
        assert doc["bundles"] == 12
        assert [s["question_id"] for s in doc["skipped"]] == ["dog-missing"]
        assert (out_dir / "manifest.jsonl").exists()
        assert len(list(out_dir.glob("*.reba"))) == 12

    def test_question_format_error_exits_2(self, model_dir, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        code, _, err = run(
            [
                "manifest", "--model", model_dir,
                "--questions", str(bad), "--out-dir", str(tmp_path / "o"),
            ],
            capsys,
        )
        assert code == 2
        assert "format error" in err

    def test_missing_question_file_exits_4(self, model_dir, tmp_path, capsys):
        code, _, err = run(
            [
                "manifest", "--model", model_dir,
                "--questions", str(tmp_path / "absent.jsonl"),
                "--out-dir", str(tmp_path / "o"),
            ],
            capsys,
        )
        assert code == 4
        assert "io error" in err
