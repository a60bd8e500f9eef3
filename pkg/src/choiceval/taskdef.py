"""YAML task definitions and multiple-choice prompt construction.

A task file binds a dataset to a prompt template, an ordered list of choice
labels, a target field, and an optional few-shot policy. Templates support
field references with an optional ``.strip()`` transform or an integer index
into a list-valued field, e.g. ``{{question.strip()}}`` or ``{{choices[2]}}``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import (
    BadSampler,
    BadTemplate,
    IndexOutOfBounds,
    MalformedConfig,
    MalformedYaml,
    MissingField,
    MissingFilterColumn,
    MissingRecordField,
    TargetOutOfRange,
    TypeMismatch,
    UnknownKey,
)

KNOWN_SAMPLERS = ("first_n",)

_TOP_LEVEL_KEYS = {
    "task",
    "dataset_path",
    "dataset_subset",
    "test_split",
    "fewshot_split",
    "fewshot_config",
    "doc_to_text",
    "doc_to_choice",
    "doc_to_target",
    "metadata",
}
_FEWSHOT_KEYS = {"sampler", "filter_column", "num_fewshot"}
_REQUIRED_KEYS = (
    "task",
    "dataset_path",
    "test_split",
    "doc_to_text",
    "doc_to_choice",
    "doc_to_target",
)

_PLACEHOLDER_RE = re.compile(r"\{\{(.*?)\}\}")
_REF_RE = re.compile(
    r"^\s*(?P<field>[A-Za-z_][A-Za-z0-9_]*)"
    r"(?:(?P<strip>\.strip\(\))|\[(?P<index>\d+)\])?\s*$"
)


def normalize_label(label: str) -> str:
    """Lowercase + whitespace-trim, the normalization shared with the evaluator."""
    return label.strip().lower()


@dataclass(frozen=True)
class Segment:
    """One template piece: literal text, or a field reference."""

    literal: Optional[str] = None
    field_name: Optional[str] = None
    strip: bool = False
    index: Optional[int] = None


@dataclass(frozen=True)
class PromptTemplate:
    source: str
    segments: tuple[Segment, ...]

    def render(self, record_fields: dict[str, Any]) -> str:
        return render_prompt(self, record_fields)


@dataclass(frozen=True)
class FewShotConfig:
    sampler: str = "first_n"
    filter_column: Optional[str] = None
    num_fewshot: int = 0


@dataclass(frozen=True)
class TaskConfig:
    task: str
    dataset_path: str
    test_split: str
    doc_to_text: PromptTemplate
    doc_to_choice: tuple[str, ...]
    doc_to_target: str
    dataset_subset: Optional[str] = None
    fewshot_split: Optional[str] = None
    fewshot_config: FewShotConfig = field(default_factory=FewShotConfig)
    metadata_version: Optional[str] = None


@dataclass(frozen=True)
class FewShotSelection:
    records: tuple
    shortfall_warning: Optional[str] = None


@dataclass(frozen=True)
class PromptInstance:
    prompt_text: str
    valid_labels: tuple[str, ...]
    gold_label: str
    record_id: str = ""


def compile_template(text: str) -> PromptTemplate:
    """Compile a ``doc_to_text`` string into a PromptTemplate."""
    segments: list[Segment] = []
    pos = 0
    for match in _PLACEHOLDER_RE.finditer(text):
        if match.start() > pos:
            segments.append(Segment(literal=text[pos:match.start()]))
        ref = _REF_RE.match(match.group(1))
        if ref is None:
            raise BadTemplate(f"unparseable placeholder: {{{{{match.group(1)}}}}}")
        index = ref.group("index")
        segments.append(
            Segment(
                field_name=ref.group("field"),
                strip=ref.group("strip") is not None,
                index=int(index) if index is not None else None,
            )
        )
        pos = match.end()
    if pos < len(text):
        segments.append(Segment(literal=text[pos:]))
    return PromptTemplate(source=text, segments=tuple(segments))


def render_prompt(template: PromptTemplate, record_fields: dict[str, Any]) -> str:
    """Render a template against a record's field map. Pure function."""
    parts: list[str] = []
    for seg in template.segments:
        if seg.literal is not None:
            parts.append(seg.literal)
            continue
        if seg.field_name not in record_fields:
            raise MissingRecordField(f"record lacks field {seg.field_name!r}")
        value = record_fields[seg.field_name]
        if seg.index is not None:
            if not isinstance(value, list):
                raise TypeMismatch(
                    f"field {seg.field_name!r} is not a list, cannot index"
                )
            if seg.index >= len(value):
                raise IndexOutOfBounds(
                    f"index {seg.index} out of bounds for field "
                    f"{seg.field_name!r} of length {len(value)}"
                )
            value = value[seg.index]
        if seg.strip:
            if not isinstance(value, str):
                raise TypeMismatch(
                    f"field {seg.field_name!r} is not a string, cannot strip"
                )
            value = value.strip()
        parts.append(str(value))
    return "".join(parts)


def _parse_metadata_version(metadata: Any) -> Optional[str]:
    # Accepts both a mapping and the list-of-mappings YAML form.
    if metadata is None:
        return None
    if isinstance(metadata, dict):
        entries = [metadata]
    elif isinstance(metadata, list):
        entries = [e for e in metadata if isinstance(e, dict)]
    else:
        raise MalformedConfig("metadata must be a mapping or list of mappings")
    for entry in entries:
        if "version" in entry:
            return str(entry["version"])
    return None


def parse_task_config(yaml_text: str) -> TaskConfig:
    """Parse one task definition. Unrecognized keys are rejected outright."""
    try:
        raw = yaml.safe_load(yaml_text)
    except yaml.YAMLError as exc:
        raise MalformedYaml(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedYaml("task definition must be a YAML mapping")

    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise UnknownKey(f"unrecognized keys: {sorted(unknown)}")
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise MissingField(f"required key missing: {key!r}")

    choices = raw["doc_to_choice"]
    if not isinstance(choices, list) or not choices:
        raise MalformedConfig("doc_to_choice must be a non-empty list")
    choices = [str(c) for c in choices]
    normalized = [normalize_label(c) for c in choices]
    if len(set(normalized)) != len(normalized):
        raise MalformedConfig(
            "doc_to_choice labels collide after lowercase+trim normalization"
        )

    fewshot = FewShotConfig()
    if raw.get("fewshot_config") is not None:
        fs_raw = raw["fewshot_config"]
        if not isinstance(fs_raw, dict):
            raise MalformedConfig("fewshot_config must be a mapping")
        unknown_fs = set(fs_raw) - _FEWSHOT_KEYS
        if unknown_fs:
            raise UnknownKey(f"unrecognized fewshot_config keys: {sorted(unknown_fs)}")
        sampler = fs_raw.get("sampler", "first_n")
        if sampler not in KNOWN_SAMPLERS:
            raise BadSampler(f"unrecognized sampler: {sampler!r}")
        num_fewshot = fs_raw.get("num_fewshot", 0)
        if not isinstance(num_fewshot, int) or num_fewshot < 0:
            raise MalformedConfig("num_fewshot must be a non-negative integer")
        filter_column = fs_raw.get("filter_column")
        fewshot = FewShotConfig(
            sampler=sampler,
            filter_column=str(filter_column) if filter_column is not None else None,
            num_fewshot=num_fewshot,
        )

    fewshot_split = raw.get("fewshot_split")
    if fewshot.num_fewshot > 0 and not fewshot_split:
        raise MissingField("fewshot_split required when num_fewshot > 0")

    return TaskConfig(
        task=str(raw["task"]),
        dataset_path=str(raw["dataset_path"]),
        dataset_subset=(
            str(raw["dataset_subset"]) if raw.get("dataset_subset") is not None else None
        ),
        test_split=str(raw["test_split"]),
        fewshot_split=str(fewshot_split) if fewshot_split else None,
        fewshot_config=fewshot,
        doc_to_text=compile_template(str(raw["doc_to_text"])),
        doc_to_choice=tuple(choices),
        doc_to_target=str(raw["doc_to_target"]),
        metadata_version=_parse_metadata_version(raw.get("metadata")),
    )


def select_fewshot(pool, test_record, cfg: FewShotConfig) -> FewShotSelection:
    """Pick in-context examples with the first_n sampler.

    ``pool`` is the fewshot split in stored order; output is always a
    subsequence of it. When filter_column is set, only pool records whose
    column value equals the test record's value are eligible.
    """
    if cfg.num_fewshot == 0:
        return FewShotSelection(records=())
    eligible = list(pool)
    if cfg.filter_column is not None:
        col = cfg.filter_column
        if col not in test_record.fields:
            raise MissingFilterColumn(
                f"test record {test_record.id!r} lacks filter column {col!r}"
            )
        for rec in eligible:
            if col not in rec.fields:
                raise MissingFilterColumn(
                    f"pool record {rec.id!r} lacks filter column {col!r}"
                )
        wanted = test_record.fields[col]
        eligible = [rec for rec in eligible if rec.fields[col] == wanted]
    selected = eligible[: cfg.num_fewshot]
    warning = None
    if len(selected) < cfg.num_fewshot:
        warning = (
            f"few-shot shortfall: requested {cfg.num_fewshot}, "
            f"only {len(selected)} matching records available"
        )
    return FewShotSelection(records=tuple(selected), shortfall_warning=warning)


def gold_label_for(task: TaskConfig, record) -> str:
    target = record.fields.get(task.doc_to_target)
    if not isinstance(target, int) or not (0 <= target < len(task.doc_to_choice)):
        raise TargetOutOfRange(
            f"record {record.id!r}: target {target!r} is not a valid index into "
            f"{len(task.doc_to_choice)} choices"
        )
    return task.doc_to_choice[target]


def build_prompt_instance(task: TaskConfig, test_record, fewshot) -> PromptInstance:
    """Assemble the final prompt: rendered few-shot examples, each followed by
    a space and its gold label plus a blank line, then the rendered test record.
    """
    parts: list[str] = []
    for example in fewshot:
        rendered = render_prompt(task.doc_to_text, example.fields)
        parts.append(f"{rendered} {gold_label_for(task, example)}\n\n")
    parts.append(render_prompt(task.doc_to_text, test_record.fields))
    return PromptInstance(
        prompt_text="".join(parts),
        valid_labels=task.doc_to_choice,
        gold_label=gold_label_for(task, test_record),
        record_id=test_record.id,
    )


def load_tasks_dir(tasks_dir: str | Path) -> dict[str, TaskConfig]:
    """Load every ``*.yaml`` task file in a directory, keyed by task name."""
    tasks: dict[str, TaskConfig] = {}
    for path in sorted(Path(tasks_dir).glob("*.yaml")):
        cfg = parse_task_config(path.read_text(encoding="utf-8"))
        if cfg.task in tasks:
            raise MalformedConfig(f"duplicate task name {cfg.task!r} in {path}")
        tasks[cfg.task] = cfg
    return tasks
