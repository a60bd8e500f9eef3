"""Command line surface: evaluate, curate, generate-qa, serve, validate.

Configuration flags fall back to environment variables:
CHOICEVAL_TASKS_DIR, CHOICEVAL_DATA_DIR, CHOICEVAL_STORE_DIR,
CHOICEVAL_BASE_URL, CHOICEVAL_API_KEY, CHOICEVAL_K.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
from pathlib import Path

from . import curation, qagen
from .client import EndpointConfig
from .dataset import load_dataset, validate_against_task
from .errors import ChoicevalError
from .evaluator import EvalJob, evaluate_run
from .gateway import create_app
from .runstore import RunStore
from .taskdef import load_tasks_dir


def _fail(code: str, message: str) -> int:
    print(f"{code}: {message}".replace("\n", " "), file=sys.stderr)
    return 1


def _env(name: str, default: str | None = None) -> str | None:
    return os.environ.get(name, default)


def cmd_evaluate(args: argparse.Namespace) -> int:
    tasks_dir = args.tasks_dir or _env("CHOICEVAL_TASKS_DIR")
    data_dir = args.data_dir or _env("CHOICEVAL_DATA_DIR")
    if not tasks_dir or not data_dir:
        return _fail("missing_config", "need --tasks-dir and --data-dir (or env)")
    store_dir = args.out or _env("CHOICEVAL_STORE_DIR") or "./choiceval-store"

    try:
        all_tasks = load_tasks_dir(tasks_dir)
        task_names = [t.strip() for t in args.tasks.split(",") if t.strip()]
        task_datasets = []
        for name in task_names:
            if name not in all_tasks:
                return _fail("unknown_task", f"no such task: {name}")
            cfg = all_tasks[name]
            ds = load_dataset(Path(data_dir) / cfg.dataset_path, cfg.dataset_subset)
            task_datasets.append((cfg, ds))

        store = RunStore(store_dir)
        record = store.create_run(
            model_name=args.model,
            endpoint_url=args.endpoint,
            model_kind=args.model_kind,
            tasks=task_names,
            k=args.k,
            concurrency=args.concurrency,
        )
        endpoint = EndpointConfig(
            base_url=args.endpoint,
            model_name=args.model,
            api_key=_env("CHOICEVAL_API_KEY"),
        )
        job = EvalJob(
            run_id=record.run_id,
            endpoint=endpoint,
            tasks=tuple(cfg for cfg, _ in task_datasets),
            k=args.k,
            concurrency_limit=args.concurrency,
        )
        record = evaluate_run(job, task_datasets, store)
    except ChoicevalError as exc:
        return _fail(type(exc).__name__.lower(), str(exc))

    print(f"run {record.run_id}  model {record.model_name}  status {record.status}")
    print(f"{'task':<24}{'total':>8}{'answered':>10}{'correct':>9}"
          f"{'skipped':>9}{'accuracy':>10}")
    for name in task_names:
        score = record.task_scores.get(name)
        if score is None:
            continue
        accuracy = f"{score.accuracy:.2f}" if score.accuracy is not None else "null"
        print(f"{score.task:<24}{score.total:>8}{score.answered:>10}"
              f"{score.correct_count:>9}{score.skipped:>9}{accuracy:>10}")
    if record.average is not None:
        print(f"{'average':<24}{'':>36}{record.average:>10.2f}")
    if record.status != "completed":
        return _fail("run_" + record.status, record.error or record.status)
    return 0


def cmd_curate(args: argparse.Namespace) -> int:
    cfg = curation.CurationConfig(
        set_size=args.set_size,
        min_underscore_run=args.underscore_run,
        ascii_only=args.ascii_only,
    )
    pairs = []
    try:
        with open(args.infile, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                raw = json.loads(line)
                pairs.append(
                    (
                        int(raw["topic"]),
                        curation.RawRecord(
                            id=str(raw["id"]),
                            text=str(raw["text"]),
                            payload={
                                k: v
                                for k, v in raw.items()
                                if k not in ("id", "text", "topic")
                            },
                        ),
                    )
                )
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        return _fail("bad_input", f"{args.infile}: {exc}")

    topics = curation.TopicMap.from_records(pairs)
    selection = curation.select_records(topics, cfg)
    try:
        with open(args.outfile, "w", encoding="utf-8") as fh:
            for topic_id, record in selection:
                fh.write(
                    json.dumps(
                        {
                            "id": record.id,
                            "text": record.text,
                            "topic": topic_id,
                            **record.payload,
                        }
                    )
                    + "\n"
                )
    except OSError as exc:
        return _fail("write_failed", str(exc))
    print(curation.curation_report(selection).format_table())
    return 0


def cmd_generate_qa(args: argparse.Namespace) -> int:
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        return _fail("bad_corpus", f"not a directory: {corpus_dir}")
    categories = [c.strip() for c in args.categories.split(",") if c.strip()]
    for category in categories:
        if category not in qagen.ALL_CATEGORIES:
            return _fail("bad_category", f"unknown category: {category}")

    gen_ep = EndpointConfig(base_url=args.gen_endpoint, model_name=args.gen_model)
    judge_ep = EndpointConfig(base_url=args.judge_endpoint, model_name=args.judge_model)
    rng = random.Random(args.seed)
    question_pool = qagen.load_completion_questions()

    results: list[qagen.QAPair] = []
    unsuitable: list[dict] = []
    for doc in sorted(corpus_dir.glob("*.txt")):
        text = qagen.preprocess_corpus(doc.read_text(encoding="utf-8"))
        if not text:
            continue
        for chunk in qagen.chunk_corpus(text, args.chunk_chars, source_doc=doc.stem):
            for category in categories:
                if category == "completion":
                    if len(chunk.text) < 4:
                        continue
                    fraction = rng.choice(qagen.COMPLETION_FRACTIONS)
                    results.append(
                        qagen.make_completion_example(
                            chunk, fraction, question_pool, rng
                        )
                    )
                    continue
                outcome = qagen.generate_qa(
                    chunk, category, gen_ep, judge_ep, threshold=args.threshold
                )
                if isinstance(outcome, qagen.QAPair):
                    results.append(outcome)
                else:
                    unsuitable.append(
                        {"chunk_id": outcome.chunk_id, "category": outcome.category}
                    )

    shuffled = qagen.build_dataset(results, [], rng)
    try:
        with open(args.outfile, "w", encoding="utf-8") as fh:
            for pair in shuffled:
                fh.write(
                    json.dumps(
                        {
                            "question": pair.question,
                            "answer": pair.answer,
                            "category": pair.category,
                            "chunk_id": pair.chunk_id,
                            "judge_score": pair.judge_score,
                        }
                    )
                    + "\n"
                )
        manifest_path = Path(args.outfile).with_suffix(".unsuitable.json")
        manifest_path.write_text(json.dumps(unsuitable, indent=2), encoding="utf-8")
    except OSError as exc:
        return _fail("write_failed", str(exc))
    print(f"wrote {len(shuffled)} pairs, {len(unsuitable)} unsuitable chunks")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        return _fail("bad_addr", f"expected HOST:PORT, got {args.addr!r}")
    store_dir = args.store or _env("CHOICEVAL_STORE_DIR")
    tasks_dir = args.tasks_dir or _env("CHOICEVAL_TASKS_DIR")
    data_dir = args.data_dir or _env("CHOICEVAL_DATA_DIR")
    if not store_dir or not tasks_dir or not data_dir:
        return _fail("missing_config", "need --store, --tasks and --data (or env)")
    app = create_app(
        RunStore(store_dir),
        tasks_dir,
        data_dir,
        default_k=args.k,
        static_dir=args.static,
    )
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    except SystemExit:
        return _fail("addr_in_use", f"cannot bind {args.addr}")
    except OSError:
        return _fail("addr_in_use", f"cannot bind {args.addr}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        tasks = load_tasks_dir(args.tasks_dir)
    except ChoicevalError as exc:
        return _fail(type(exc).__name__.lower(), str(exc))
    defect_count = 0
    for name, cfg in tasks.items():
        try:
            ds = load_dataset(Path(args.data_dir) / cfg.dataset_path, cfg.dataset_subset)
        except ChoicevalError as exc:
            print(f"{name}: load error: {exc}")
            defect_count += 1
            continue
        report = validate_against_task(ds, cfg)
        if report.ok:
            print(f"{name}: ok ({len(ds.split(cfg.test_split))} records)")
        else:
            for defect in report.defects:
                print(f"{name}: {defect.record_id}: {defect.kind}: {defect.detail}")
            defect_count += len(report.defects)
    if defect_count:
        return _fail("validation_defects", f"{defect_count} defects found")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choiceval",
        description="Multiple-choice LLM benchmarking harness and server",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="run an evaluation synchronously")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--tasks", required=True, help="comma-separated task names")
    p.add_argument("--model-kind", choices=("base", "fine_tuned"),
                   default="fine_tuned")
    p.add_argument("--k", type=int, default=int(_env("CHOICEVAL_K", "5")))
    p.add_argument("--concurrency", type=int, default=8)
    p.add_argument("--out", help="store directory")
    p.add_argument("--tasks-dir")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curate", help="topic-balanced record selection")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--set-size", type=int, default=10_000)
    p.add_argument("--underscore-run", type=int, default=10)
    p.add_argument("--ascii-only", action=argparse.BooleanOptionalAction,
                   default=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("generate-qa", help="synthetic Q&A dataset generation")
    p.add_argument("--corpus", required=True, help="directory of .txt files")
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--categories", default=",".join(qagen.ALL_CATEGORIES))
    p.add_argument("--gen-endpoint", required=True)
    p.add_argument("--judge-endpoint", required=True)
    p.add_argument("--gen-model", default="generator")
    p.add_argument("--judge-model", default="judge")
    p.add_argument("--threshold", type=float, default=qagen.DEFAULT_THRESHOLD)
    p.add_argument("--chunk-chars", type=int, default=qagen.DEFAULT_CHUNK_CHARS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate_qa)

    p = sub.add_parser("serve", help="start the REST gateway")
    p.add_argument("--addr", default="127.0.0.1:8400")
    p.add_argument("--store")
    p.add_argument("--tasks", dest="tasks_dir")
    p.add_argument("--data", dest="data_dir")
    p.add_argument("--static", help="directory of built frontend assets")
    p.add_argument("--k", type=int, default=int(_env("CHOICEVAL_K", "5")))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="validate tasks against datasets")
    p.add_argument("--tasks", dest="tasks_dir", required=True)
    p.add_argument("--data", dest="data_dir", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
