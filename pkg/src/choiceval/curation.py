"""Topic-balanced benchmark subsetting.

Cleaning is rules-based: records containing a long run of underscores
(fill-in-the-blank artifacts) or, optionally, any non-ASCII character are
rejected. Selection sweeps topics in ascending topic id order, taking one
clean record per topic per cycle until the target size is reached or every
topic is exhausted. Topic assignment is an input; this module does not do
any topic modeling.
"""
from __future__ import annotations

import re
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Any, Iterable


@dataclass(frozen=True)
class RawRecord:
    id: str
    text: str
    payload: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class CurationConfig:
    set_size: int = 10_000
    min_underscore_run: int = 10
    ascii_only: bool = True

    def __post_init__(self):
        if self.set_size < 0:
            raise ValueError("set_size must be >= 0")
        if self.min_underscore_run < 1:
            raise ValueError("min_underscore_run must be >= 1")


class TopicMap:
    """Mapping of topic id (may be -1 for outliers) to an ordered record list.
    Iteration is always in ascending topic id order."""

    def __init__(self, entries: dict[int, Iterable[RawRecord]]):
        self._entries: OrderedDict[int, list[RawRecord]] = OrderedDict(
            (topic_id, list(records))
            for topic_id, records in sorted(entries.items())
        )

    def items(self):
        return self._entries.items()

    def topic_ids(self) -> list[int]:
        return list(self._entries)

    def records(self, topic_id: int) -> list[RawRecord]:
        return list(self._entries[topic_id])

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, RawRecord]]) -> "TopicMap":
        grouped: dict[int, list[RawRecord]] = {}
        for topic_id, record in records:
            grouped.setdefault(topic_id, []).append(record)
        return cls(grouped)


def is_clean(record: RawRecord, cfg: CurationConfig) -> bool:
    """False iff the text holds a run of >= min_underscore_run underscores,
    or (under ascii_only) any code point above 127."""
    if re.search("_{%d,}" % cfg.min_underscore_run, record.text):
        return False
    if cfg.ascii_only and any(ord(ch) > 127 for ch in record.text):
        return False
    return True


def select_records(
    topics: TopicMap, cfg: CurationConfig
) -> list[tuple[int, RawRecord]]:
    """Round-robin selection across topics.

    Each cycle visits topics in ascending id order; within a topic, records
    are popped from the front until one passes is_clean (dirty records are
    consumed and discarded), and that record is accepted before moving on.
    Stops at set_size, or when every topic has been exhausted.
    """
    queues: OrderedDict[int, list[RawRecord]] = OrderedDict(
        (topic_id, list(records)) for topic_id, records in topics.items()
    )
    selected: list[tuple[int, RawRecord]] = []
    while len(selected) < cfg.set_size:
        any_left = False
        for topic_id, queue in queues.items():
            while queue:
                record = queue.pop(0)
                if is_clean(record, cfg):
                    selected.append((topic_id, record))
                    any_left = True
                    break
            if len(selected) == cfg.set_size:
                break
        if not any_left:
            break
    return selected


@dataclass(frozen=True)
class CurationReport:
    per_topic: dict[int, int]
    total: int

    def format_table(self) -> str:
        """Render as a two-column text table with a total row."""
        lines = [f"{'Topic':>8}  {'Records':>8}", "-" * 18]
        for topic_id in sorted(self.per_topic):
            lines.append(f"{topic_id:>8}  {self.per_topic[topic_id]:>8,}")
        lines.append("-" * 18)
        lines.append(f"{'Total':>8}  {self.total:>8,}")
        return "\n".join(lines)


def curation_report(selection: list[tuple[int, RawRecord]]) -> CurationReport:
    counts = Counter(topic_id for topic_id, _ in selection)
    return CurationReport(per_topic=dict(counts), total=len(selection))
