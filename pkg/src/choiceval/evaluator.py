"""Task administration and the filtered top-k answer-extraction metric.

Each question costs exactly one model forward pass: the top-k next-token
candidates are fetched once, normalized (lowercase + whitespace trim),
filtered against the task's choice labels, and the most probable surviving
candidate is the model's answer. Questions with no surviving candidate are
flagged no_valid_response and scored as incorrect.
"""
from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional, Sequence

from . import client as _client
from .client import EndpointConfig, TokenCandidate
from .dataset import Dataset, validate_against_task
from .errors import AbortedRun, EndpointError, NoLogprobs, UndefinedAverage
from .taskdef import (
    PromptInstance,
    TaskConfig,
    build_prompt_instance,
    normalize_label,
    select_fewshot,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuestionVerdict:
    record_id: str
    gold_label: str
    chosen_label: Optional[str]
    correct: bool
    candidates: tuple[TokenCandidate, ...]
    no_valid_response: bool = False
    latency: float = 0.0
    skipped: bool = False
    skip_reason: Optional[str] = None


@dataclass(frozen=True)
class TaskScore:
    task: str
    total: int
    answered: int
    correct_count: int
    skipped: int
    accuracy: Optional[float]  # rounded to 2 decimals; None when all skipped
    incomplete: bool = False


@dataclass(frozen=True)
class EvalJob:
    run_id: str
    endpoint: EndpointConfig
    tasks: tuple[TaskConfig, ...]
    k: int = 5
    concurrency_limit: int = 8

    def __post_init__(self):
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if not self.tasks:
            raise ValueError("job must contain at least one task")
        names = [t.task for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError("task names must be unique within a job")


def round2(value: float) -> float:
    """Round half-up to two decimals, the convention at reporting boundaries."""
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def filtered_top_k(
    candidates: Sequence[TokenCandidate], valid_labels: Sequence[str]
) -> Optional[str]:
    """Answer-extraction rule: drop candidates whose normalized token is not
    exactly a normalized label; the highest-probability survivor wins.
    Returns None when nothing survives. Candidates arrive sorted by
    probability descending, so the first match is the answer.
    """
    by_norm = {normalize_label(label): label for label in valid_labels}
    for candidate in candidates:
        label = by_norm.get(normalize_label(candidate.token))
        if label is not None:
            return label
    return None


def evaluate_question(
    job: EvalJob, task: TaskConfig, instance: PromptInstance
) -> QuestionVerdict:
    """Score one question: one forward pass, then the filtered top-k rule.
    A finally-failing endpoint call records the question as skipped."""
    start = time.monotonic()
    try:
        candidates = _client.top_k_next_tokens(
            job.endpoint, instance.prompt_text, k=job.k
        )
    except NoLogprobs:
        raise
    except EndpointError as exc:
        logger.warning("question %s: endpoint error: %s", instance.record_id, exc)
        return QuestionVerdict(
            record_id=instance.record_id,
            gold_label=instance.gold_label,
            chosen_label=None,
            correct=False,
            candidates=(),
            latency=time.monotonic() - start,
            skipped=True,
            skip_reason="endpoint_error",
        )
    chosen = filtered_top_k(candidates, instance.valid_labels)
    return QuestionVerdict(
        record_id=instance.record_id,
        gold_label=instance.gold_label,
        chosen_label=chosen,
        correct=chosen == instance.gold_label,
        candidates=tuple(candidates),
        no_valid_response=chosen is None,
        latency=time.monotonic() - start,
    )


def score_from_verdicts(task_name: str, verdicts: Sequence[QuestionVerdict],
                        incomplete: bool = False) -> TaskScore:
    total = len(verdicts)
    skipped = sum(1 for v in verdicts if v.skipped)
    answered = sum(1 for v in verdicts if v.chosen_label is not None)
    correct = sum(1 for v in verdicts if v.correct)
    graded = total - skipped
    accuracy = round2(100.0 * correct / graded) if graded > 0 else None
    return TaskScore(
        task=task_name,
        total=total,
        answered=answered,
        correct_count=correct,
        skipped=skipped,
        accuracy=accuracy,
        incomplete=incomplete,
    )


def evaluate_task(
    job: EvalJob,
    task: TaskConfig,
    ds: Dataset,
    on_verdict: Optional[Callable[[QuestionVerdict], None]] = None,
    cancel: Optional[threading.Event] = None,
) -> tuple[TaskScore, list[QuestionVerdict]]:
    """Administer one task. Questions run concurrently up to the job's
    concurrency limit; verdicts are emitted in completion order but the final
    score is order-insensitive, so it is independent of the limit.

    Records flagged defective by validation are skipped without issuing a
    request. Cancellation stops new submissions; already-submitted questions
    finish and their verdicts are retained.
    """
    report = validate_against_task(ds, task)
    defective = report.defective_ids()
    test_records = ds.split(task.test_split)
    fewshot_pool = ds.split(task.fewshot_split) if task.fewshot_split else ()

    emit_lock = threading.Lock()
    verdicts: list[QuestionVerdict] = []
    cancelled = False

    def emit(verdict: QuestionVerdict) -> None:
        with emit_lock:
            verdicts.append(verdict)
            if on_verdict is not None:
                on_verdict(verdict)

    def skip(record_id: str, reason: str) -> None:
        emit(
            QuestionVerdict(
                record_id=record_id,
                gold_label="",
                chosen_label=None,
                correct=False,
                candidates=(),
                skipped=True,
                skip_reason=reason,
            )
        )

    def run_one(record) -> None:
        nonlocal cancelled
        if cancel is not None and cancel.is_set():
            cancelled = True
            return
        selection = select_fewshot(fewshot_pool, record, task.fewshot_config)
        if selection.shortfall_warning:
            logger.warning("%s: %s", record.id, selection.shortfall_warning)
        instance = build_prompt_instance(task, record, selection.records)
        emit(evaluate_question(job, task, instance))

    with ThreadPoolExecutor(max_workers=job.concurrency_limit) as pool:
        futures = []
        for record in test_records:
            if cancel is not None and cancel.is_set():
                cancelled = True
                break
            if record.id in defective:
                skip(record.id, "validation_defect")
                continue
            futures.append(pool.submit(run_one, record))
        no_logprobs: Optional[NoLogprobs] = None
        for future in futures:
            exc = future.exception()
            if isinstance(exc, NoLogprobs):
                no_logprobs = exc
            elif exc is not None:
                raise exc
        if no_logprobs is not None:
            raise no_logprobs

    score = score_from_verdicts(task.task, verdicts, incomplete=cancelled)
    if cancelled:
        raise AbortedRun(f"task {task.task!r} cancelled", partial_score=score)
    return score, verdicts


def aggregate_average(scores: Sequence[TaskScore | float]) -> float:
    """Unweighted arithmetic mean of task accuracies, two decimals, half-up."""
    values: list[float] = []
    for score in scores:
        accuracy = score.accuracy if isinstance(score, TaskScore) else score
        if accuracy is None:
            raise UndefinedAverage("cannot average a null task score")
        values.append(float(accuracy))
    if not values:
        raise UndefinedAverage("cannot average an empty score list")
    return round2(sum(values) / len(values))


def evaluate_run(
    job: EvalJob,
    task_datasets: Sequence[tuple[TaskConfig, Dataset]],
    store,
    cancel: Optional[threading.Event] = None,
):
    """Execute a full run against the store: tasks sequentially, questions
    concurrently, verdicts and scores written through the run-store interface.
    Returns the terminal RunRecord (completed, failed, or cancelled)."""
    store.mark_running(job.run_id)
    scores: dict[str, TaskScore] = {}
    try:
        for task, ds in task_datasets:
            if cancel is not None and cancel.is_set():
                raise AbortedRun("run cancelled")
            score, _ = evaluate_task(
                job,
                task,
                ds,
                on_verdict=lambda v, t=task.task: store.append_verdict(
                    job.run_id, t, v
                ),
                cancel=cancel,
            )
            scores[task.task] = score
            store.set_task_score(job.run_id, task.task, score)
    except AbortedRun as exc:
        if exc.partial_score is not None:
            scores[exc.partial_score.task] = exc.partial_score
        return store.cancel_run(job.run_id, task_scores=scores)
    except Exception as exc:  # noqa: BLE001 - any fatal error fails the run
        logger.exception("run %s failed", job.run_id)
        return store.fail_run(job.run_id, error=str(exc), task_scores=scores)
    try:
        average = aggregate_average(list(scores.values()))
    except UndefinedAverage:
        average = None
    return store.complete_run(job.run_id, task_scores=scores, average=average)
