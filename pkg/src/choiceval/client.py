"""HTTP client for OpenAI-compatible inference servers.

Two call shapes are used: a single-forward-pass completion that returns the
top-k next-token candidates (the evaluation path), and multi-turn chat
completions with optional streaming (Q&A generation and the chat interface).
"""
from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import httpx

from .errors import (
    NoLogprobs,
    StreamInterrupted,
    Unreachable,
    Upstream4xx,
    Upstream5xx,
)

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: Optional[str] = None
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base_ms: float = 250.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass(frozen=True)
class TokenCandidate:
    token: str
    prob: float


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class HealthStatus:
    reachable: bool
    supports_logprobs: bool
    latency: float


def _headers(ep: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if ep.api_key:
        headers["Authorization"] = f"Bearer {ep.api_key}"
    return headers


def _url(ep: EndpointConfig, path: str) -> str:
    return ep.base_url.rstrip("/") + path


def _post_with_retries(ep: EndpointConfig, path: str, payload: dict) -> httpx.Response:
    """POST with exponential jittered backoff on 5xx and connection errors.

    4xx responses are not retried; a response, once received OK, is returned
    immediately and used exactly once by the caller.
    """
    last_error: Exception | None = None
    for attempt in range(ep.max_retries + 1):
        if attempt > 0:
            delay = (ep.backoff_base_ms / 1000.0) * (2 ** (attempt - 1))
            time.sleep(delay * (0.5 + random.random()))
        try:
            response = httpx.post(
                _url(ep, path), json=payload, headers=_headers(ep), timeout=ep.timeout
            )
        except httpx.TransportError as exc:
            last_error = Unreachable(f"cannot reach {ep.base_url}: {exc}")
            continue
        if 400 <= response.status_code < 500:
            raise Upstream4xx(
                f"{path} returned {response.status_code}: {response.text[:200]}",
                status_code=response.status_code,
            )
        if response.status_code >= 500:
            last_error = Upstream5xx(
                f"{path} returned {response.status_code}",
                status_code=response.status_code,
            )
            continue
        return response
    assert last_error is not None
    raise last_error


def _parse_completion_logprobs(body: dict) -> Optional[dict[str, float]]:
    # completions shape: choices[0].logprobs.top_logprobs[0] = {token: logprob}
    try:
        top = body["choices"][0]["logprobs"]["top_logprobs"][0]
    except (KeyError, IndexError, TypeError):
        return None
    if not isinstance(top, dict):
        return None
    return {str(k): float(v) for k, v in top.items()}


def _parse_chat_logprobs(body: dict) -> Optional[dict[str, float]]:
    # chat shape: choices[0].logprobs.content[0].top_logprobs = [{token, logprob}]
    try:
        entries = body["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
    except (KeyError, IndexError, TypeError):
        return None
    if not isinstance(entries, list):
        return None
    return {str(e["token"]): float(e["logprob"]) for e in entries}


def top_k_next_tokens(ep: EndpointConfig, prompt: str, k: int = DEFAULT_TOP_K) -> list[TokenCandidate]:
    """One forward pass: request a single generated token with top-k
    alternatives and convert the reported logprobs to probabilities.

    Falls back to the chat endpoint when the completions route is absent;
    the contract (one request, top-k candidates sorted by probability
    descending) is identical either way.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not prompt:
        raise ValueError("prompt must be non-empty")
    payload = {
        "model": ep.model_name,
        "prompt": prompt,
        "max_tokens": 1,
        "temperature": 0,
        "logprobs": k,
    }
    try:
        response = _post_with_retries(ep, "/completions", payload)
    except Upstream4xx as exc:
        if exc.status_code != 404:
            raise
        chat_payload = {
            "model": ep.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": True,
            "top_logprobs": k,
        }
        response = _post_with_retries(ep, "/chat/completions", chat_payload)
        logprobs = _parse_chat_logprobs(response.json())
    else:
        logprobs = _parse_completion_logprobs(response.json())
    if logprobs is None:
        raise NoLogprobs(
            f"endpoint {ep.base_url} did not return token alternatives; "
            "it cannot be used for evaluation"
        )
    candidates = [
        TokenCandidate(token=token, prob=math.exp(logprob))
        for token, logprob in logprobs.items()
    ]
    # Stable sort keeps endpoint-reported order between equal probabilities.
    candidates.sort(key=lambda c: c.prob, reverse=True)
    return candidates[:k]


def _require_user_last(messages: list[ChatMessage]) -> None:
    if not messages or messages[-1].role != "user":
        raise ValueError("messages must end with a user turn")


def _messages_payload(messages: Iterable[ChatMessage]) -> list[dict]:
    return [{"role": m.role, "content": m.content} for m in messages]


def chat_complete(ep: EndpointConfig, messages: list[ChatMessage]) -> ChatMessage:
    """Non-streaming chat completion; returns the full assistant message."""
    _require_user_last(messages)
    payload = {
        "model": ep.model_name,
        "messages": _messages_payload(messages),
        "temperature": 0,
        "stream": False,
    }
    response = _post_with_retries(ep, "/chat/completions", payload)
    body = response.json()
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise Upstream5xx(f"malformed chat response: {body!r:.200}") from exc
    return ChatMessage(role="assistant", content=str(content))


def chat_stream(ep: EndpointConfig, messages: list[ChatMessage]) -> Iterator[str]:
    """Streaming chat completion; yields content fragments in order.

    For a deterministic endpoint the concatenated fragments equal the
    non-streaming reply. An interrupted stream raises StreamInterrupted
    carrying the partial content, never a silent truncation.
    """
    _require_user_last(messages)
    payload = {
        "model": ep.model_name,
        "messages": _messages_payload(messages),
        "temperature": 0,
        "stream": True,
    }
    collected: list[str] = []
    try:
        with httpx.stream(
            "POST",
            _url(ep, "/chat/completions"),
            json=payload,
            headers=_headers(ep),
            timeout=ep.timeout,
        ) as response:
            if 400 <= response.status_code < 500:
                raise Upstream4xx(
                    f"/chat/completions returned {response.status_code}",
                    status_code=response.status_code,
                )
            if response.status_code >= 500:
                raise Upstream5xx(
                    f"/chat/completions returned {response.status_code}",
                    status_code=response.status_code,
                )
            done = False
            for line in response.iter_lines():
                if not line.startswith("data:"):
                    continue
                data = line[len("data:"):].strip()
                if data == "[DONE]":
                    done = True
                    break
                try:
                    chunk = json.loads(data)
                    delta = chunk["choices"][0]["delta"]
                except (json.JSONDecodeError, KeyError, IndexError, TypeError):
                    continue
                fragment = delta.get("content")
                if fragment:
                    collected.append(fragment)
                    yield fragment
            if not done:
                raise StreamInterrupted(
                    "stream ended without [DONE] marker", partial="".join(collected)
                )
    except httpx.TransportError as exc:
        if collected:
            raise StreamInterrupted(
                f"stream interrupted: {exc}", partial="".join(collected)
            ) from exc
        raise Unreachable(f"cannot reach {ep.base_url}: {exc}") from exc


def health_check(ep: EndpointConfig) -> HealthStatus:
    """Probe an endpoint with a 1-token request; failures are encoded in the
    returned status, never raised."""
    probe = EndpointConfig(
        base_url=ep.base_url,
        model_name=ep.model_name,
        api_key=ep.api_key,
        timeout=ep.timeout,
        max_retries=0,
        backoff_base_ms=ep.backoff_base_ms,
    )
    start = time.monotonic()
    try:
        top_k_next_tokens(probe, "health probe", k=1)
        supports_logprobs = True
        reachable = True
    except NoLogprobs:
        supports_logprobs = False
        reachable = True
    except Upstream4xx:
        # Endpoint answered but rejected the probe: reachable, no logprobs.
        supports_logprobs = False
        reachable = True
    except (Unreachable, Upstream5xx):
        supports_logprobs = False
        reachable = False
    return HealthStatus(
        reachable=reachable,
        supports_logprobs=supports_logprobs,
        latency=time.monotonic() - start,
    )
