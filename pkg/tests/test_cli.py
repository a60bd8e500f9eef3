from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from choiceval.runstore import RunStore

from test_dataset import write_split

TESTS_DIR = Path(__file__).parent


def run_cli(*argv, env_extra=None):
    import os

    env = dict(os.environ)
    env["PYTHONPATH"] = str(TESTS_DIR)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "choiceval.cli", *argv],
        capture_output=True, text=True, env=env, timeout=120,
    )


@pytest.fixture
def eval_layout(tmp_path, listing_yaml):
    """Zero-shot task directory plus a matching 20-record dataset."""
    yaml_text = listing_yaml.replace("num_fewshot: 5", "num_fewshot: 0")
    yaml_text = "\n".join(
        line for line in yaml_text.splitlines()
        if not line.startswith("fewshot_split")
    )
    tasks_dir = tmp_path / "tasks"
    tasks_dir.mkdir()
    (tasks_dir / "mmlu.yaml").write_text(yaml_text, encoding="utf-8")
    records = [
        {
            "id": f"q{i}",
            "question": f"[q{i}] question {i}",
            "choices": ["w", "x", "y", "z"],
            "answer": 0,
            "subject": "m",
        }
        for i in range(20)
    ]
    data_dir = tmp_path / "data"
    write_split(data_dir / "cais" / "mmlu" / "all", "test", records)
    return tasks_dir, data_dir


class TestEvaluateCommand:
    def test_score_matches_store(self, tmp_path, eval_layout, mock_server):
        from test_evaluator import scripted_handler

        tasks_dir, data_dir = eval_layout
        mock_server.completion_handler = scripted_handler(
            {f"q{i}" for i in range(12)}
        )
        store_dir = tmp_path / "store"
        proc = run_cli(
            "evaluate",
            "--endpoint", mock_server.base_url,
            "--model", "cli-model",
            "--tasks", "mmlu",
            "--tasks-dir", str(tasks_dir),
            "--data-dir", str(data_dir),
            "--out", str(store_dir),
            "--concurrency", "4",
        )
        assert proc.returncode == 0, proc.stderr
        assert "60.00" in proc.stdout
        rows = RunStore(store_dir).query_leaderboard()
        assert rows[0].model_name == "cli-model"
        assert rows[0].average == 60.00
        assert f"{rows[0].average:.2f}" in proc.stdout

    def test_unknown_task_single_line_error(self, tmp_path, eval_layout):
        tasks_dir, data_dir = eval_layout
        proc = run_cli(
            "evaluate",
            "--endpoint", "http://127.0.0.1:1",
            "--model", "m",
            "--tasks", "missing",
            "--tasks-dir", str(tasks_dir),
            "--data-dir", str(data_dir),
            "--out", str(tmp_path / "store"),
        )
        assert proc.returncode == 1
        lines = [l for l in proc.stderr.splitlines() if l.strip()]
        assert len(lines) == 1
        assert lines[0].startswith("unknown_task: ")

    def test_env_fallback_for_directories(self, tmp_path, eval_layout, mock_server):
        tasks_dir, data_dir = eval_layout
        proc = run_cli(
            "evaluate",
            "--endpoint", mock_server.base_url,
            "--model", "env-model",
            "--tasks", "mmlu",
            "--out", str(tmp_path / "store"),
            env_extra={
                "CHOICEVAL_TASKS_DIR": str(tasks_dir),
                "CHOICEVAL_DATA_DIR": str(data_dir),
            },
        )
        assert proc.returncode == 0, proc.stderr


class TestCurateCommand:
    def _write_input(self, path, rows):
        with path.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")

    def test_round_robin_output(self, tmp_path):
        infile = tmp_path / "in.jsonl"
        rows = [
            {"id": f"t{t}-r{i}", "text": f"record {t} {i}", "topic": t}
            for t in range(3)
            for i in range(4)
        ]
        self._write_input(infile, rows)
        outfile = tmp_path / "out.jsonl"
        proc = run_cli(
            "curate", "--in", str(infile), "--out", str(outfile),
            "--set-size", "6",
        )
        assert proc.returncode == 0, proc.stderr
        selected = [json.loads(l) for l in outfile.read_text().splitlines()]
        assert [r["topic"] for r in selected] == [0, 1, 2, 0, 1, 2]
        assert "Total" in proc.stdout

    def test_set_size_zero(self, tmp_path):
        infile = tmp_path / "in.jsonl"
        self._write_input(infile, [{"id": "a", "text": "x", "topic": 0}])
        outfile = tmp_path / "out.jsonl"
        proc = run_cli(
            "curate", "--in", str(infile), "--out", str(outfile),
            "--set-size", "0",
        )
        assert proc.returncode == 0, proc.stderr
        assert outfile.read_text() == ""

    def test_missing_input(self, tmp_path):
        proc = run_cli(
            "curate", "--in", str(tmp_path / "nope.jsonl"),
            "--out", str(tmp_path / "out.jsonl"),
        )
        assert proc.returncode == 1
        assert proc.stderr.startswith("bad_input: ")


class TestGenerateQaCommand:
    def test_completion_only_needs_no_endpoint(self, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / "doc.txt").write_text("Sample sentence. " * 50, encoding="utf-8")
        outfile = tmp_path / "qa.jsonl"
        proc = run_cli(
            "generate-qa",
            "--corpus", str(corpus),
            "--out", str(outfile),
            "--categories", "completion",
            "--gen-endpoint", "http://127.0.0.1:1",
            "--judge-endpoint", "http://127.0.0.1:1",
            "--seed", "3",
        )
        assert proc.returncode == 0, proc.stderr
        pairs = [json.loads(l) for l in outfile.read_text().splitlines()]
        assert pairs
        assert all(p["category"] == "completion" for p in pairs)
        manifest = json.loads(
            (tmp_path / "qa.unsuitable.json").read_text()
        )
        assert manifest == []


class TestValidateCommand:
    def test_clean_layout(self, eval_layout):
        tasks_dir, data_dir = eval_layout
        proc = run_cli("validate", "--tasks", str(tasks_dir), "--data", str(data_dir))
        assert proc.returncode == 0, proc.stderr
        assert "mmlu: ok (20 records)" in proc.stdout

    def test_defects_exit_nonzero(self, tmp_path, eval_layout):
        tasks_dir, data_dir = eval_layout
        split = data_dir / "cais" / "mmlu" / "all" / "test.jsonl"
        lines = split.read_text().splitlines()
        bad = json.loads(lines[0])
        bad["answer"] = 9
        lines[0] = json.dumps(bad)
        split.write_text("\n".join(lines) + "\n", encoding="utf-8")
        proc = run_cli("validate", "--tasks", str(tasks_dir), "--data", str(data_dir))
        assert proc.returncode == 1
        assert "target_out_of_range" in proc.stdout
        assert proc.stderr.startswith("validation_defects: ")
