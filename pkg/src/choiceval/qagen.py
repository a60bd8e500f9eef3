"""Synthetic instruction-tuning data from a raw domain corpus.

Pipeline: preprocess the corpus text, split it into chunks, then run a
generate-judge-retry loop per (chunk, category). A generator endpoint is
prompted for one Q&A pair, a judge endpoint scores it on a 1-10 rubric, and
the pair is kept once the score meets the threshold; after ten failed
attempts the chunk is marked unsuitable for that category. The completion
category never calls an LLM: it splits the chunk at a fraction mark and asks
the model to continue the prefix.
"""
from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

from . import client as _client
from .client import ChatMessage, EndpointConfig
from .errors import EndpointError

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 10
DEFAULT_THRESHOLD = 8
DEFAULT_CHUNK_CHARS = 6_000
UNSUITABLE_MARK = "<unsuitable for conversion>"

LLM_CATEGORIES = (
    "summarization",
    "domain_vocabulary",
    "natural_language_inference",
    "commonsense_reasoning",
    "paraphrase_detection",
)
ALL_CATEGORIES = LLM_CATEGORIES + ("completion",)

COMPLETION_FRACTIONS = (0.25, 0.50, 0.75)

_QA_RE = re.compile(
    r"^\s*(?:\(\(Q\)\)|Q)\s*:\s*(?P<q>.+?)\s*^\s*(?:\(\(A\)\)|A)\s*:\s*(?P<a>.+)\s*$",
    re.DOTALL | re.MULTILINE,
)
_SCORE_RE = re.compile(r"\b(10|[1-9])\b")


@dataclass(frozen=True)
class Chunk:
    id: str
    source_doc: str
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    category: str
    chunk_id: str
    attempts_used: int = 1
    judge_score: float = 0.0


@dataclass(frozen=True)
class UnsuitableMark:
    chunk_id: str
    category: str
    attempts_used: int = MAX_ATTEMPTS
    label: str = UNSUITABLE_MARK


def load_prompt(name: str) -> str:
    return (
        resources.files("choiceval.prompts").joinpath(f"{name}.txt").read_text("utf-8")
    )


def load_completion_questions() -> list[str]:
    text = load_prompt("completion_questions")
    return [line.strip() for line in text.splitlines() if line.strip()]


def preprocess_corpus(text: str) -> str:
    """Lowercase everything and collapse each whitespace run to one space.
    Idempotent."""
    return " ".join(text.lower().split())


def chunk_corpus(
    text: str, chunk_chars: int = DEFAULT_CHUNK_CHARS, source_doc: str = ""
) -> list[Chunk]:
    """Split text into in-order chunks of at most chunk_chars.

    Splits at the last whitespace inside the final 20% of the window when one
    exists, else hard-splits at the limit. Spans partition the input exactly.
    """
    if chunk_chars < 200:
        raise ValueError("chunk_chars must be >= 200")
    chunks: list[Chunk] = []
    pos = 0
    while pos < len(text):
        remaining = len(text) - pos
        if remaining <= chunk_chars:
            end = len(text)
        else:
            window = text[pos:pos + chunk_chars]
            floor = int(chunk_chars * 0.8)
            split_at = None
            for i in range(len(window) - 1, floor - 1, -1):
                if window[i].isspace():
                    split_at = i + 1  # whitespace stays with the current chunk
                    break
            end = pos + (split_at if split_at is not None else chunk_chars)
        chunks.append(
            Chunk(
                id=f"{source_doc or 'corpus'}-{len(chunks)}",
                source_doc=source_doc,
                text=text[pos:end],
                char_span=(pos, end),
            )
        )
        pos = end
    return chunks


def parse_qa_reply(reply: str) -> Optional[tuple[str, str]]:
    """Extract one (question, answer) pair; both ((Q))://((A)): and Q:/A:
    marker styles are accepted. None when the reply is unparseable."""
    match = _QA_RE.search(reply)
    if match is None:
        return None
    question = match.group("q").strip()
    answer = match.group("a").strip()
    if not question or not answer:
        return None
    return question, answer


def parse_judge_score(reply: str) -> Optional[int]:
    match = _SCORE_RE.search(reply)
    return int(match.group(1)) if match else None


def _judge_prompt(question: str, answer: str, chunk_text: str) -> str:
    return (
        "You are grading a quiz question generated from a source text.\n"
        "Score the question and answer pair for faithfulness to the source, "
        "clarity, and domain-specific value.\n"
        "Respond with a single integer from 1 (unusable) to 10 (excellent). "
        "Respond with the integer only.\n\n"
        f"### SOURCE\n{chunk_text}\n\n"
        f"### QUESTION\n{question}\n\n"
        f"### ANSWER\n{answer}\n"
    )


def generate_qa(
    chunk: Chunk,
    category: str,
    gen_ep: EndpointConfig,
    judge_ep: EndpointConfig,
    threshold: float = DEFAULT_THRESHOLD,
) -> Union[QAPair, UnsuitableMark]:
    """Generate-judge-retry loop for one (chunk, category).

    Unparseable generations and endpoint failures each consume an attempt;
    after MAX_ATTEMPTS failures the pair is marked unsuitable, never raised.
    """
    if category not in LLM_CATEGORIES:
        raise ValueError(f"category {category!r} has no generation prompt")
    guidelines = load_prompt("guidelines")
    category_prompt = load_prompt(category)
    user_prompt = f"{category_prompt}\n### INPUT\n{chunk.text}"
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            reply = _client.chat_complete(
                gen_ep,
                [
                    ChatMessage(role="system", content=guidelines),
                    ChatMessage(role="user", content=user_prompt),
                ],
            )
        except EndpointError as exc:
            logger.warning("chunk %s/%s attempt %d: generator error: %s",
                           chunk.id, category, attempt, exc)
            continue
        parsed = parse_qa_reply(reply.content)
        if parsed is None:
            logger.debug("chunk %s/%s attempt %d: unparseable generation",
                         chunk.id, category, attempt)
            continue
        question, answer = parsed
        try:
            judge_reply = _client.chat_complete(
                judge_ep,
                [
                    ChatMessage(
                        role="user",
                        content=_judge_prompt(question, answer, chunk.text),
                    )
                ],
            )
        except EndpointError as exc:
            logger.warning("chunk %s/%s attempt %d: judge error: %s",
                           chunk.id, category, attempt, exc)
            continue
        score = parse_judge_score(judge_reply.content)
        if score is not None and score >= threshold:
            return QAPair(
                question=question,
                answer=answer,
                category=category,
                chunk_id=chunk.id,
                attempts_used=attempt,
                judge_score=float(score),
            )
    return UnsuitableMark(chunk_id=chunk.id, category=category)


def make_completion_example(
    chunk: Chunk,
    fraction: float,
    question_pool: Sequence[str],
    rng: random.Random,
) -> QAPair:
    """Split the chunk at the 25/50/75% mark: a pool question plus the prefix
    becomes the question, the suffix becomes the answer. No LLM call."""
    if fraction not in COMPLETION_FRACTIONS:
        raise ValueError(f"fraction must be one of {COMPLETION_FRACTIONS}")
    if len(chunk.text) < 4:
        raise ValueError("chunk too short to split")
    if not question_pool:
        raise ValueError("question_pool must be non-empty")
    split = int(len(chunk.text) * fraction)
    prefix, suffix = chunk.text[:split], chunk.text[split:]
    lead = rng.choice(list(question_pool))
    return QAPair(
        question=f"{lead}\n### INPUT\n{prefix}",
        answer=suffix,
        category="completion",
        chunk_id=chunk.id,
        attempts_used=1,
        judge_score=0.0,
    )


def build_dataset(
    pairs: Iterable[Union[QAPair, UnsuitableMark]],
    external_pairs: Iterable[QAPair],
    rng: random.Random,
) -> list[QAPair]:
    """Seeded shuffle of generated plus external pairs; unsuitable marks
    contribute nothing."""
    combined = [p for p in pairs if isinstance(p, QAPair)]
    combined.extend(external_pairs)
    rng.shuffle(combined)
    return combined
