"""REST gateway: run lifecycle, leaderboard/audit queries, multi-model chat.

Single-process deployment: the gateway embeds the evaluator and the run
store. Evaluations started over HTTP execute on background threads and are
observed by polling the run record; chat fan-out streams per-participant
server-sent events.
"""
from __future__ import annotations

import json
import logging
import queue
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import client as _client
from .client import ChatMessage, EndpointConfig
from .dataset import load_dataset
from .errors import (
    BadFilter,
    DatasetError,
    DuplicateRun,
    EndpointError,
    RunNotRunning,
    TaskConfigError,
    UnknownRun,
)
from .evaluator import EvalJob, evaluate_run
from .runstore import AUDIT_FILTERS, MODEL_KINDS, RunStore
from .taskdef import TaskConfig, load_tasks_dir

logger = logging.getLogger(__name__)

MAX_CHAT_PARTICIPANTS = 10


class ApiError(Exception):
    def __init__(self, code: str, message: str, http_status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = http_status


@dataclass
class ChatSession:
    session_id: str
    participants: list[EndpointConfig]
    # One transcript per participant; user turns are identical across them.
    transcripts: list[list[ChatMessage]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _run_to_json(record) -> dict[str, Any]:
    return record.to_dict()


def _verdict_to_json(verdict) -> dict[str, Any]:
    return {
        "record_id": verdict.record_id,
        "gold_label": verdict.gold_label,
        "chosen_label": verdict.chosen_label,
        "correct": verdict.correct,
        "candidates": [
            {"token": c.token, "prob": c.prob} for c in verdict.candidates
        ],
        "no_valid_response": verdict.no_valid_response,
        "skipped": verdict.skipped,
        "skip_reason": verdict.skip_reason,
    }


def create_app(
    store: RunStore,
    tasks_dir: str | Path,
    data_root: str | Path,
    default_k: int = 5,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="choiceval gateway")
    cancel_events: dict[str, threading.Event] = {}
    sessions: dict[str, ChatSession] = {}
    sessions_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"code": exc.code, "message": exc.message},
        )

    def _load_task(name: str) -> TaskConfig:
        try:
            tasks = load_tasks_dir(tasks_dir)
        except TaskConfigError as exc:
            raise ApiError("bad_task_config", str(exc), 500)
        if name not in tasks:
            raise ApiError("unknown_task", f"no such task: {name}", 400)
        return tasks[name]

    def _resolve_datasets(task_names: list[str]):
        pairs = []
        for name in task_names:
            cfg = _load_task(name)
            try:
                ds = load_dataset(
                    Path(data_root) / cfg.dataset_path, cfg.dataset_subset
                )
            except DatasetError as exc:
                raise ApiError("dataset_error", str(exc), 400)
            pairs.append((cfg, ds))
        return pairs

    # --- runs ---

    @app.post("/api/runs", status_code=202)
    async def submit_run(body: dict):
        for key in ("model_name", "endpoint", "model_kind", "tasks"):
            if key not in body:
                raise ApiError("missing_field", f"missing field {key!r}", 400)
        if body["model_kind"] not in MODEL_KINDS:
            raise ApiError(
                "bad_model_kind", f"model_kind must be one of {MODEL_KINDS}", 400
            )
        task_names = body["tasks"]
        if not isinstance(task_names, list) or not task_names:
            raise ApiError("empty_tasks", "tasks must be a non-empty list", 400)
        k = int(body.get("k", default_k))
        concurrency = int(body.get("concurrency", 8))
        task_datasets = _resolve_datasets(task_names)
        try:
            record = store.create_run(
                model_name=body["model_name"],
                endpoint_url=body["endpoint"],
                model_kind=body["model_kind"],
                tasks=task_names,
                k=k,
                concurrency=concurrency,
                run_id=body.get("run_id"),
            )
        except DuplicateRun as exc:
            raise ApiError("duplicate_run", str(exc), 409)
        endpoint = EndpointConfig(
            base_url=body["endpoint"],
            model_name=body["model_name"],
            api_key=body.get("api_key"),
        )
        job = EvalJob(
            run_id=record.run_id,
            endpoint=endpoint,
            tasks=tuple(cfg for cfg, _ in task_datasets),
            k=k,
            concurrency_limit=concurrency,
        )
        cancel = threading.Event()
        cancel_events[record.run_id] = cancel
        worker = threading.Thread(
            target=evaluate_run,
            args=(job, task_datasets, store, cancel),
            daemon=True,
            name=f"eval-{record.run_id}",
        )
        worker.start()
        return _run_to_json(record)

    @app.get("/api/runs")
    async def list_runs():
        return [_run_to_json(r) for r in store.list_runs()]

    @app.get("/api/runs/{run_id}")
    async def get_run(run_id: str):
        try:
            return _run_to_json(store.get_run(run_id))
        except UnknownRun as exc:
            raise ApiError("unknown_run", str(exc), 404)

    @app.post("/api/runs/{run_id}/cancel")
    async def cancel_run(run_id: str):
        try:
            record = store.get_run(run_id)
        except UnknownRun as exc:
            raise ApiError("unknown_run", str(exc), 404)
        event = cancel_events.get(run_id)
        if event is not None:
            event.set()
        if record.status == "pending":
            try:
                record = store.cancel_run(run_id)
            except RunNotRunning:
                record = store.get_run(run_id)
        return _run_to_json(record)

    @app.get("/api/runs/{run_id}/audit")
    async def audit(
        run_id: str,
        task: Optional[str] = None,
        filter: str = "all",
        offset: int = 0,
        limit: int = 50,
    ):
        if filter not in AUDIT_FILTERS:
            raise ApiError(
                "bad_filter", f"filter must be one of {AUDIT_FILTERS}", 400
            )
        try:
            page, total = store.query_audit(
                run_id, task=task, filter=filter, offset=offset, limit=limit
            )
        except UnknownRun as exc:
            raise ApiError("unknown_run", str(exc), 404)
        except BadFilter as exc:
            raise ApiError("bad_filter", str(exc), 400)
        return {
            "total": total,
            "offset": offset,
            "limit": limit,
            "verdicts": [_verdict_to_json(v) for v in page],
        }

    @app.get("/api/leaderboard")
    async def leaderboard():
        rows = store.query_leaderboard()
        return {
            "rows": [
                {
                    "model_name": row.model_name,
                    "model_kind": row.model_kind,
                    "average": row.average,
                    "task_accuracies": row.task_accuracies,
                    "run_id": row.run_id,
                }
                for row in rows
            ],
            "radar": [
                {"model_name": row.model_name, "series": row.task_accuracies}
                for row in rows
            ],
        }

    # --- chat ---

    def _get_session(session_id: str) -> ChatSession:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise ApiError("unknown_session", f"no such session: {session_id}", 404)
        return session

    @app.post("/api/chat/sessions", status_code=201)
    async def create_session(body: dict):
        participants_raw = body.get("participants")
        if not isinstance(participants_raw, list) or not participants_raw:
            raise ApiError(
                "missing_participants", "participants must be a non-empty list", 400
            )
        if len(participants_raw) > MAX_CHAT_PARTICIPANTS:
            raise ApiError(
                "too_many_participants",
                f"at most {MAX_CHAT_PARTICIPANTS} participants per session",
                400,
            )
        participants = []
        for entry in participants_raw:
            if not isinstance(entry, dict) or "base_url" not in entry:
                raise ApiError(
                    "bad_participant", "each participant needs a base_url", 400
                )
            participants.append(
                EndpointConfig(
                    base_url=entry["base_url"],
                    model_name=entry.get("model_name", "model"),
                    api_key=entry.get("api_key"),
                )
            )
        session = ChatSession(
            session_id=uuid.uuid4().hex[:12],
            participants=participants,
            transcripts=[[] for _ in participants],
        )
        with sessions_lock:
            sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "participants": [
                {"base_url": ep.base_url, "model_name": ep.model_name}
                for ep in participants
            ],
        }

    @app.delete("/api/chat/sessions/{session_id}")
    async def delete_session(session_id: str):
        _get_session(session_id)
        with sessions_lock:
            sessions.pop(session_id, None)
        return {"deleted": session_id}

    def _fan_out(session: ChatSession, content: str, events: queue.Queue) -> None:
        """Send the same user turn to every participant concurrently.
        Fragments and per-participant errors flow into the event queue;
        one unreachable participant never blocks the others."""
        user_turn = ChatMessage(role="user", content=content)

        def one(index: int) -> None:
            endpoint = session.participants[index]
            messages = list(session.transcripts[index]) + [user_turn]
            collected: list[str] = []
            try:
                for fragment in _client.chat_stream(endpoint, messages):
                    collected.append(fragment)
                    events.put(
                        {"participant": index, "type": "fragment", "content": fragment}
                    )
            except EndpointError as exc:
                events.put(
                    {
                        "participant": index,
                        "type": "error",
                        "code": "endpoint_unreachable",
                        "message": str(exc),
                        "http_status": 502,
                    }
                )
                return
            reply = "".join(collected)
            with session.lock:
                session.transcripts[index].append(user_turn)
                session.transcripts[index].append(
                    ChatMessage(role="assistant", content=reply or " ")
                )
            events.put({"participant": index, "type": "done", "content": reply})

        with ThreadPoolExecutor(max_workers=len(session.participants)) as pool:
            futures = [
                pool.submit(one, i) for i in range(len(session.participants))
            ]
            for future in futures:
                future.result()
        events.put(None)

    @app.post("/api/chat/sessions/{session_id}/messages")
    async def post_message(session_id: str, body: dict, stream: bool = False):
        session = _get_session(session_id)
        content = body.get("content")
        if not content:
            raise ApiError("empty_message", "content must be non-empty", 400)

        events: queue.Queue = queue.Queue()
        worker = threading.Thread(
            target=_fan_out, args=(session, content, events), daemon=True
        )
        worker.start()

        if stream:
            def sse():
                while True:
                    event = events.get()
                    if event is None:
                        yield "event: done\ndata: {}\n\n"
                        break
                    name = f"participant-{event['participant']}"
                    yield f"event: {name}\ndata: {json.dumps(event)}\n\n"

            return StreamingResponse(sse(), media_type="text/event-stream")

        replies: dict[int, dict[str, Any]] = {}
        while True:
            event = events.get()
            if event is None:
                break
            if event["type"] == "done":
                replies[event["participant"]] = {
                    "participant": event["participant"],
                    "content": event["content"],
                }
            elif event["type"] == "error":
                replies[event["participant"]] = {
                    "participant": event["participant"],
                    "error": {
                        "code": event["code"],
                        "message": event["message"],
                        "http_status": event["http_status"],
                    },
                }
        return {
            "replies": [replies[i] for i in sorted(replies)],
        }

    @app.get("/api/health")
    async def health():
        storage_ok = (Path(store.root) / "runs").is_dir()
        return {"status": "ok" if storage_ok else "degraded", "storage": storage_ok}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True))

    return app
