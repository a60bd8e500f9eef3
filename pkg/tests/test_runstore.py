from __future__ import annotations

import subprocess
import sys
import textwrap

import pytest

from choiceval import errors
from choiceval.evaluator import QuestionVerdict, TaskScore, aggregate_average
from choiceval.runstore import AUDIT_FILTERS, RunStore


def verdict(i, correct=True, skipped=False, no_valid=False):
    return QuestionVerdict(
        record_id=f"q{i:04d}",
        gold_label="A",
        chosen_label=None if (skipped or no_valid) else ("A" if correct else "B"),
        correct=correct and not skipped and not no_valid,
        candidates=(),
        no_valid_response=no_valid,
        latency=0.01,
        skipped=skipped,
        skip_reason="endpoint_error" if skipped else None,
    )


def make_score(correct, total, skipped=0):
    scored = total - skipped
    accuracy = None if scored == 0 else round(100 * correct / scored, 2)
    return TaskScore(
        task="t", total=total, answered=scored, correct_count=correct,
        skipped=skipped, accuracy=accuracy,
    )


def new_run(store, model="m1", run_id=None, tasks=("t",)):
    return store.create_run(
        model_name=model, endpoint_url="http://x", model_kind="base",
        tasks=list(tasks), run_id=run_id,
    )


class TestLifecycle:
    def test_create_and_get(self, tmp_path):
        store = RunStore(tmp_path)
        record = new_run(store, run_id="abc")
        assert record.status == "pending"
        assert store.get_run("abc").model_name == "m1"

    def test_duplicate_run_id(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="abc")
        with pytest.raises(errors.DuplicateRun):
            new_run(store, run_id="abc")

    def test_unknown_run(self, tmp_path):
        store = RunStore(tmp_path)
        with pytest.raises(errors.UnknownRun):
            store.get_run("nope")

    def test_bad_model_kind(self, tmp_path):
        store = RunStore(tmp_path)
        with pytest.raises(ValueError):
            store.create_run(
                model_name="m", endpoint_url="http://x",
                model_kind="distilled", tasks=["t"],
            )

    def test_status_machine(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        store.complete_run("r", {"t": make_score(7, 10)}, average=70.0)
        record = store.get_run("r")
        assert record.status == "completed"
        assert record.finished_at is not None
        with pytest.raises(errors.RunNotRunning):
            store.mark_running("r")

    def test_terminal_states_frozen(self, tmp_path):
        store = RunStore(tmp_path)
        for run_id, finisher in [
            ("a", lambda: store.fail_run("a", "boom")),
            ("b", lambda: store.cancel_run("b")),
        ]:
            new_run(store, run_id=run_id)
            store.mark_running(run_id)
            finisher()
            with pytest.raises(errors.RunNotRunning):
                store.complete_run(run_id, {}, average=None)

    def test_unwritable_root(self, tmp_path):
        not_a_dir = tmp_path / "occupied"
        not_a_dir.write_text("plain file")
        with pytest.raises(errors.StorageFailure):
            RunStore(not_a_dir / "store")


class TestVerdictLog:
    def test_append_only_growth(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        for i in range(10):
            store.append_verdict("r", "t", verdict(i, correct=(i % 2 == 0)))
        path = tmp_path / "runs" / "r" / "verdicts.jsonl"
        assert len(path.read_text().splitlines()) == 10
        loaded = store.load_verdicts("r")
        assert [v.record_id for v in loaded] == [f"q{i:04d}" for i in range(10)]

    def test_append_requires_running(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        with pytest.raises(errors.RunNotRunning):
            store.append_verdict("r", "t", verdict(0))
        store.mark_running("r")
        store.cancel_run("r")
        with pytest.raises(errors.RunNotRunning):
            store.append_verdict("r", "t", verdict(0))

    def test_progress_counter(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        for i in range(7):
            store.append_verdict("r", "t", verdict(i))
        assert store.get_run("r").progress["t"]["done"] == 7

    def test_verdict_roundtrip(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        original = [
            verdict(0),
            verdict(1, correct=False),
            verdict(2, skipped=True),
            verdict(3, no_valid=True),
        ]
        for v in original:
            store.append_verdict("r", "t", v)
        assert store.load_verdicts("r", task="t") == original

    def test_forced_restart_recovery(self, tmp_path):
        """A writer killed mid-run must leave every acknowledged verdict
        readable after the store is reopened."""
        script = textwrap.dedent(
            """
            import os, sys
            sys.path.insert(0, {tests_dir!r})
            from choiceval.runstore import RunStore
            from test_runstore import new_run, verdict

            store = RunStore({root!r})
            new_run(store, run_id="crash")
            store.mark_running("crash")
            for i in range(50):
                store.append_verdict("crash", "t", verdict(i))
            os._exit(1)
            """
        ).format(tests_dir=str(__import__("pathlib").Path(__file__).parent),
                 root=str(tmp_path))
        proc = subprocess.run([sys.executable, "-c", script])
        assert proc.returncode == 1
        reopened = RunStore(tmp_path)
        record = reopened.get_run("crash")
        assert record.status == "running"
        assert len(reopened.load_verdicts("crash")) == 50
        # the orphaned run can still be driven to a terminal state
        reopened.fail_run("crash", "writer died")
        assert reopened.get_run("crash").status == "failed"


class TestAudit:
    def _populated(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        # 4 passed, 3 failed, 2 skipped, 1 no_valid_response
        for i in range(4):
            store.append_verdict("r", "t", verdict(i))
        for i in range(4, 7):
            store.append_verdict("r", "t", verdict(i, correct=False))
        for i in range(7, 9):
            store.append_verdict("r", "t", verdict(i, skipped=True))
        store.append_verdict("r", "t", verdict(9, no_valid=True))
        return store

    def test_filters(self, tmp_path):
        store = self._populated(tmp_path)
        expectations = {
            "all": 10, "passed": 4, "failed": 4,
            "skipped": 2, "no_valid_response": 1,
        }
        assert set(expectations) == set(AUDIT_FILTERS)
        for name, count in expectations.items():
            page, total = store.query_audit("r", filter=name, limit=100)
            assert total == count
            assert len(page) == count

    def test_no_valid_response_counts_as_failed(self, tmp_path):
        store = self._populated(tmp_path)
        page, _ = store.query_audit("r", filter="failed", limit=100)
        assert "q0009" in [v.record_id for v in page]

    def test_ordering_and_paging(self, tmp_path):
        store = self._populated(tmp_path)
        first, total = store.query_audit("r", offset=0, limit=4)
        second, _ = store.query_audit("r", offset=4, limit=4)
        assert total == 10
        ids = [v.record_id for v in first + second]
        assert ids == sorted(ids)
        assert len(set(ids)) == 8

    def test_bad_filter(self, tmp_path):
        store = self._populated(tmp_path)
        with pytest.raises(errors.BadFilter):
            store.query_audit("r", filter="bogus")


class TestLeaderboard:
    def _finish(self, store, run_id, model, scores):
        new_run(store, model=model, run_id=run_id, tasks=list(scores))
        store.mark_running(run_id)
        average = aggregate_average(list(scores.values()))
        store.complete_run(run_id, scores, average=average)

    def test_sorted_by_average_desc(self, tmp_path):
        store = RunStore(tmp_path)
        self._finish(store, "r1", "low", {"t": make_score(5, 10)})
        self._finish(store, "r2", "high", {"t": make_score(9, 10)})
        rows = store.query_leaderboard()
        assert [r.model_name for r in rows] == ["high", "low"]
        assert rows[0].average == 90.0

    def test_latest_completed_run_wins(self, tmp_path):
        store = RunStore(tmp_path)
        self._finish(store, "old", "m", {"t": make_score(2, 10)})
        self._finish(store, "new", "m", {"t": make_score(8, 10)})
        rows = store.query_leaderboard()
        assert len(rows) == 1
        assert rows[0].run_id == "new"

    def test_non_completed_runs_excluded(self, tmp_path):
        store = RunStore(tmp_path)
        self._finish(store, "done", "m1", {"t": make_score(6, 10)})
        new_run(store, model="m2", run_id="pending")
        new_run(store, model="m3", run_id="dead")
        store.mark_running("dead")
        store.fail_run("dead", "boom")
        rows = store.query_leaderboard()
        assert [r.model_name for r in rows] == ["m1"]

    def test_score_recompute_consistency(self, tmp_path):
        store = RunStore(tmp_path)
        new_run(store, run_id="r")
        store.mark_running("r")
        for i in range(10):
            store.append_verdict("r", "t", verdict(i, correct=(i < 7)))
        score = make_score(7, 10)
        store.complete_run("r", {"t": score}, average=score.accuracy)
        loaded = store.load_verdicts("r", task="t")
        recomputed = sum(1 for v in loaded if v.correct)
        assert recomputed == store.get_run("r").task_scores["t"].correct_count
