"""Durable, append-only persistence for evaluation runs.

Layout under the storage root:

    runs/<run_id>/run.json        run header (rewritten on state changes)
    runs/<run_id>/verdicts.jsonl  append-only verdict log, one per line
    index.json                    model_name -> latest completed run_id

Verdict appends are flushed and fsynced before acknowledgement, so a crash
never loses an acknowledged verdict. One writer per run, many readers.
"""
from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .client import TokenCandidate
from .errors import (
    BadFilter,
    DuplicateRun,
    RunNotRunning,
    StorageFailure,
    UnknownRun,
)
from .evaluator import QuestionVerdict, TaskScore

RUN_STATUSES = ("pending", "running", "completed", "failed", "cancelled")
TERMINAL_STATUSES = ("completed", "failed", "cancelled")
AUDIT_FILTERS = ("all", "failed", "passed", "no_valid_response", "skipped")
MODEL_KINDS = ("base", "fine_tuned")


@dataclass
class RunRecord:
    run_id: str
    model_name: str
    endpoint_url: str
    model_kind: str
    tasks: list[str]
    k: int = 5
    concurrency: int = 8
    status: str = "pending"
    task_scores: dict[str, Optional[TaskScore]] = field(default_factory=dict)
    average: Optional[float] = None
    created_at: float = 0.0
    finished_at: Optional[float] = None
    error: Optional[str] = None
    progress: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "model_name": self.model_name,
            "endpoint_url": self.endpoint_url,
            "model_kind": self.model_kind,
            "tasks": self.tasks,
            "k": self.k,
            "concurrency": self.concurrency,
            "status": self.status,
            "task_scores": {
                name: (score.__dict__ if score is not None else None)
                for name, score in self.task_scores.items()
            },
            "average": self.average,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "progress": self.progress,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunRecord":
        scores = {
            name: (TaskScore(**value) if value is not None else None)
            for name, value in raw.get("task_scores", {}).items()
        }
        return cls(
            run_id=raw["run_id"],
            model_name=raw["model_name"],
            endpoint_url=raw["endpoint_url"],
            model_kind=raw["model_kind"],
            tasks=list(raw.get("tasks", [])),
            k=raw.get("k", 5),
            concurrency=raw.get("concurrency", 8),
            status=raw["status"],
            task_scores=scores,
            average=raw.get("average"),
            created_at=raw.get("created_at", 0.0),
            finished_at=raw.get("finished_at"),
            error=raw.get("error"),
            progress=raw.get("progress", {}),
        )


@dataclass(frozen=True)
class LeaderboardRow:
    model_name: str
    model_kind: str
    average: float
    task_accuracies: dict[str, Optional[float]]
    run_id: str


def _verdict_to_dict(task: str, verdict: QuestionVerdict) -> dict[str, Any]:
    return {
        "task": task,
        "record_id": verdict.record_id,
        "gold_label": verdict.gold_label,
        "chosen_label": verdict.chosen_label,
        "correct": verdict.correct,
        "candidates": [
            {"token": c.token, "prob": c.prob} for c in verdict.candidates
        ],
        "no_valid_response": verdict.no_valid_response,
        "latency": verdict.latency,
        "skipped": verdict.skipped,
        "skip_reason": verdict.skip_reason,
    }


def _verdict_from_dict(raw: dict[str, Any]) -> QuestionVerdict:
    return QuestionVerdict(
        record_id=raw["record_id"],
        gold_label=raw["gold_label"],
        chosen_label=raw["chosen_label"],
        correct=raw["correct"],
        candidates=tuple(
            TokenCandidate(token=c["token"], prob=c["prob"])
            for c in raw.get("candidates", [])
        ),
        no_valid_response=raw.get("no_valid_response", False),
        latency=raw.get("latency", 0.0),
        skipped=raw.get("skipped", False),
        skip_reason=raw.get("skip_reason"),
    )


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.RLock()
        try:
            (self.root / "runs").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(f"cannot create storage root {self.root}: {exc}")

    # --- paths ---

    def _run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def _header_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / "run.json"

    def _verdicts_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / "verdicts.jsonl"

    # --- header IO ---

    def _write_header(self, record: RunRecord) -> None:
        path = self._header_path(record.run_id)
        tmp = path.with_suffix(".json.tmp")
        try:
            with tmp.open("w", encoding="utf-8") as fh:
                json.dump(record.to_dict(), fh)
                fh.flush()
                os.fsync(fh.fileno())
            tmp.replace(path)
        except OSError as exc:
            raise StorageFailure(f"cannot persist run {record.run_id}: {exc}")

    def _read_header(self, run_id: str) -> RunRecord:
        path = self._header_path(run_id)
        if not path.exists():
            raise UnknownRun(f"no such run: {run_id}")
        with path.open(encoding="utf-8") as fh:
            return RunRecord.from_dict(json.load(fh))

    # --- lifecycle ---

    def create_run(
        self,
        model_name: str,
        endpoint_url: str,
        model_kind: str,
        tasks: list[str],
        k: int = 5,
        concurrency: int = 8,
        run_id: Optional[str] = None,
    ) -> RunRecord:
        if model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        with self._lock:
            run_id = run_id or uuid.uuid4().hex[:12]
            run_dir = self._run_dir(run_id)
            if run_dir.exists():
                raise DuplicateRun(f"run {run_id} already exists")
            try:
                run_dir.mkdir(parents=True)
            except OSError as exc:
                raise StorageFailure(f"cannot create run directory: {exc}")
            record = RunRecord(
                run_id=run_id,
                model_name=model_name,
                endpoint_url=endpoint_url,
                model_kind=model_kind,
                tasks=list(tasks),
                k=k,
                concurrency=concurrency,
                created_at=time.time(),
            )
            self._write_header(record)
            return record

    def get_run(self, run_id: str) -> RunRecord:
        with self._lock:
            return self._read_header(run_id)

    def list_runs(self) -> list[RunRecord]:
        with self._lock:
            runs = []
            for run_dir in sorted((self.root / "runs").iterdir()):
                if (run_dir / "run.json").exists():
                    runs.append(self._read_header(run_dir.name))
            runs.sort(key=lambda r: r.created_at, reverse=True)
            return runs

    def _transition(self, run_id: str, status: str, **updates) -> RunRecord:
        with self._lock:
            record = self._read_header(run_id)
            allowed = {
                "pending": ("running", "cancelled", "failed"),
                "running": TERMINAL_STATUSES,
            }
            if status not in allowed.get(record.status, ()):
                raise RunNotRunning(
                    f"run {run_id}: cannot move {record.status} -> {status}"
                )
            record.status = status
            for key, value in updates.items():
                setattr(record, key, value)
            if status in TERMINAL_STATUSES:
                record.finished_at = time.time()
            self._write_header(record)
            return record

    def mark_running(self, run_id: str) -> RunRecord:
        return self._transition(run_id, "running")

    def complete_run(
        self,
        run_id: str,
        task_scores: dict[str, TaskScore],
        average: Optional[float],
    ) -> RunRecord:
        with self._lock:
            record = self._transition(
                run_id, "completed",
                task_scores=dict(task_scores), average=average,
            )
            self._update_index(record)
            return record

    def fail_run(
        self, run_id: str, error: str, task_scores: Optional[dict] = None
    ) -> RunRecord:
        return self._transition(
            run_id, "failed", error=error, task_scores=dict(task_scores or {})
        )

    def cancel_run(
        self, run_id: str, task_scores: Optional[dict] = None
    ) -> RunRecord:
        return self._transition(
            run_id, "cancelled", task_scores=dict(task_scores or {})
        )

    def set_task_score(self, run_id: str, task: str, score: TaskScore) -> None:
        with self._lock:
            record = self._read_header(run_id)
            record.task_scores[task] = score
            self._write_header(record)

    # --- verdicts ---

    def append_verdict(self, run_id: str, task: str, verdict: QuestionVerdict) -> None:
        with self._lock:
            record = self._read_header(run_id)
            if record.status != "running":
                raise RunNotRunning(
                    f"run {run_id} is {record.status}, not accepting verdicts"
                )
            line = json.dumps(_verdict_to_dict(task, verdict))
            try:
                with self._verdicts_path(run_id).open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"cannot append verdict: {exc}")
            progress = record.progress.setdefault(task, {"done": 0})
            progress["done"] += 1
            self._write_header(record)

    def load_verdicts(
        self, run_id: str, task: Optional[str] = None
    ) -> list[QuestionVerdict]:
        with self._lock:
            self._read_header(run_id)  # existence check
            path = self._verdicts_path(run_id)
            verdicts: list[QuestionVerdict] = []
            if not path.exists():
                return verdicts
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    raw = json.loads(line)
                    if task is None or raw.get("task") == task:
                        verdicts.append(_verdict_from_dict(raw))
            return verdicts

    # --- queries ---

    def query_audit(
        self,
        run_id: str,
        task: Optional[str] = None,
        filter: str = "all",
        offset: int = 0,
        limit: int = 50,
    ) -> tuple[list[QuestionVerdict], int]:
        """Verdict page ordered by record_id; returns (page, total matched)."""
        if filter not in AUDIT_FILTERS:
            raise BadFilter(f"filter must be one of {AUDIT_FILTERS}")
        verdicts = self.load_verdicts(run_id, task=task)
        predicates = {
            "all": lambda v: True,
            "failed": lambda v: not v.correct and not v.skipped,
            "passed": lambda v: v.correct,
            "no_valid_response": lambda v: v.no_valid_response,
            "skipped": lambda v: v.skipped,
        }
        matched = sorted(
            (v for v in verdicts if predicates[filter](v)),
            key=lambda v: v.record_id,
        )
        return matched[offset:offset + limit], len(matched)

    def _update_index(self, record: RunRecord) -> None:
        index_path = self.root / "index.json"
        index: dict[str, str] = {}
        if index_path.exists():
            index = json.loads(index_path.read_text(encoding="utf-8"))
        index[record.model_name] = record.run_id
        tmp = index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index), encoding="utf-8")
        tmp.replace(index_path)

    def query_leaderboard(self) -> list[LeaderboardRow]:
        """One row per model: the most recent completed run, sorted by
        average descending."""
        with self._lock:
            latest: dict[str, RunRecord] = {}
            for record in self.list_runs():
                if record.status != "completed" or record.average is None:
                    continue
                current = latest.get(record.model_name)
                if current is None or record.created_at > current.created_at:
                    latest[record.model_name] = record
            rows = [
                LeaderboardRow(
                    model_name=record.model_name,
                    model_kind=record.model_kind,
                    average=record.average,
                    task_accuracies={
                        name: (score.accuracy if score is not None else None)
                        for name, score in record.task_scores.items()
                    },
                    run_id=record.run_id,
                )
                for record in latest.values()
            ]
            rows.sort(key=lambda r: r.average, reverse=True)
            return rows
