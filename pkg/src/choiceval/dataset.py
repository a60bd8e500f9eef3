"""Benchmark dataset loading and validation.

On-disk layout: ``<root>/<name>[/<subset>]/<split>.jsonl``, one JSON record
per line. Record ids come from the ``id`` field or are synthesized as
``<split>-<line>`` when absent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import DatasetNotFound, DatasetParseError, DuplicateId
from .taskdef import TaskConfig


@dataclass(frozen=True)
class Record:
    id: str
    fields: dict[str, Any]


@dataclass(frozen=True)
class Dataset:
    name: str
    splits: dict[str, tuple[Record, ...]]
    subset: Optional[str] = None

    def split(self, name: str) -> tuple[Record, ...]:
        return self.splits.get(name, ())


@dataclass(frozen=True)
class Defect:
    record_id: str
    kind: str  # missing_field | target_out_of_range | choices_length_mismatch
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    defects: tuple[Defect, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.defects

    def defective_ids(self) -> frozenset[str]:
        return frozenset(d.record_id for d in self.defects)


def _load_split(path: Path, split_name: str) -> tuple[Record, ...]:
    records: list[Record] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(
                    f"{path}:{lineno}: invalid JSON: {exc}",
                    path=str(path),
                    line=lineno,
                ) from exc
            if not isinstance(raw, dict):
                raise DatasetParseError(
                    f"{path}:{lineno}: record must be a JSON object",
                    path=str(path),
                    line=lineno,
                )
            rec_id = str(raw.pop("id", f"{split_name}-{lineno}"))
            if rec_id in seen:
                raise DuplicateId(f"duplicate record id {rec_id!r} in {path}")
            seen.add(rec_id)
            records.append(Record(id=rec_id, fields=raw))
    return tuple(records)


def load_dataset(path: str | Path, subset: Optional[str] = None) -> Dataset:
    """Load every ``<split>.jsonl`` file in a dataset directory."""
    root = Path(path)
    if subset:
        root = root / subset
    if not root.is_dir():
        raise DatasetNotFound(f"dataset directory not found: {root}")
    splits: dict[str, tuple[Record, ...]] = {}
    for split_file in sorted(root.glob("*.jsonl")):
        splits[split_file.stem] = _load_split(split_file, split_file.stem)
    return Dataset(name=root.name if not subset else Path(path).name,
                   subset=subset, splits=splits)


def validate_against_task(ds: Dataset, task: TaskConfig) -> ValidationReport:
    """Check every test-split record against the task's template and target.

    Defects are data, not exceptions: the report lists missing template
    fields, out-of-range targets, and choices-length mismatches per record.
    """
    defects: list[Defect] = []
    template_fields: dict[str, Optional[int]] = {}
    for seg in task.doc_to_text.segments:
        if seg.field_name is not None:
            prev = template_fields.get(seg.field_name)
            if seg.index is not None and (prev is None or seg.index > prev):
                template_fields[seg.field_name] = seg.index
            elif seg.field_name not in template_fields:
                template_fields[seg.field_name] = None

    required_fields = set(template_fields)
    required_fields.add(task.doc_to_target)
    if task.fewshot_config.filter_column is not None:
        required_fields.add(task.fewshot_config.filter_column)

    for record in ds.split(task.test_split):
        for name in sorted(required_fields):
            if name not in record.fields:
                defects.append(Defect(record.id, "missing_field", f"missing {name!r}"))
        for name, max_index in template_fields.items():
            if max_index is None or name not in record.fields:
                continue
            value = record.fields[name]
            if not isinstance(value, list) or max_index >= len(value):
                length = len(value) if isinstance(value, list) else "non-list"
                defects.append(
                    Defect(
                        record.id,
                        "choices_length_mismatch",
                        f"template references {name}[{max_index}] but "
                        f"record value has length {length}",
                    )
                )
        target = record.fields.get(task.doc_to_target)
        if target is not None and (
            not isinstance(target, int)
            or not (0 <= target < len(task.doc_to_choice))
        ):
            defects.append(
                Defect(
                    record.id,
                    "target_out_of_range",
                    f"target {target!r} not a valid index into "
                    f"{len(task.doc_to_choice)} choices",
                )
            )
    return ValidationReport(defects=tuple(defects))
