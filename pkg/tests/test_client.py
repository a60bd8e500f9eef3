from __future__ import annotations

import math

import pytest

from choiceval import errors
from choiceval.client import (
    ChatMessage,
    EndpointConfig,
    chat_complete,
    chat_stream,
    health_check,
    top_k_next_tokens,
)
from mock_endpoint import logprobs_of


def ep(base_url, **kwargs) -> EndpointConfig:
    kwargs.setdefault("max_retries", 2)
    kwargs.setdefault("backoff_base_ms", 5.0)
    kwargs.setdefault("timeout", 5.0)
    return EndpointConfig(base_url=base_url, model_name="test-model", **kwargs)


FIXTURE = {" A": 0.6, " B": 0.3, "The": 0.05, " C": 0.03, " D": 0.02}


class TestTopKNextTokens:
    def test_logprob_exponentiation_and_order(self, mock_server):
        mock_server.completion_handler = lambda prompt: logprobs_of(FIXTURE)
        candidates = top_k_next_tokens(ep(mock_server.base_url), "q", k=5)
        assert len(candidates) == 5
        assert candidates[0].token == " A"
        assert candidates[0].prob == pytest.approx(0.6)
        probs = [c.prob for c in candidates]
        assert probs == sorted(probs, reverse=True)

    def test_k_one_returns_modal_token(self, mock_server):
        mock_server.completion_handler = lambda prompt: logprobs_of(FIXTURE)
        candidates = top_k_next_tokens(ep(mock_server.base_url), "q", k=1)
        assert [c.token for c in candidates] == [" A"]

    def test_no_logprobs_is_fatal(self, mock_server):
        mock_server.no_logprobs = True
        with pytest.raises(errors.NoLogprobs):
            top_k_next_tokens(ep(mock_server.base_url), "q", k=5)

    def test_chat_fallback_when_completions_absent(self, mock_server):
        mock_server.disable_completions = True
        mock_server.completion_handler = lambda prompt: logprobs_of(FIXTURE)
        candidates = top_k_next_tokens(ep(mock_server.base_url), "q", k=5)
        assert candidates[0].token == " A"
        assert mock_server.request_count("/chat/completions") == 1

    def test_5xx_retried_then_succeeds(self, mock_server):
        mock_server.fail_next = 2
        mock_server.completion_handler = lambda prompt: logprobs_of({" A": 1.0})
        candidates = top_k_next_tokens(ep(mock_server.base_url), "q", k=1)
        assert candidates[0].token == " A"
        # a successful response is consumed exactly once: one recorded request
        assert mock_server.request_count("/completions") == 1

    def test_5xx_exhausts_retries(self, mock_server):
        mock_server.fail_next = 10
        with pytest.raises(errors.Upstream5xx):
            top_k_next_tokens(ep(mock_server.base_url), "q", k=1)

    def test_unreachable(self):
        with pytest.raises(errors.Unreachable):
            top_k_next_tokens(
                ep("http://127.0.0.1:1", max_retries=0), "q", k=1
            )

    def test_preconditions(self, mock_server):
        with pytest.raises(ValueError):
            top_k_next_tokens(ep(mock_server.base_url), "q", k=0)
        with pytest.raises(ValueError):
            top_k_next_tokens(ep(mock_server.base_url), "", k=1)

    def test_monotone_conversion(self, mock_server):
        dist = {f"t{i}": p for i, p in enumerate([0.4, 0.25, 0.2, 0.1, 0.05])}
        mock_server.completion_handler = lambda prompt: logprobs_of(dist)
        candidates = top_k_next_tokens(ep(mock_server.base_url), "q", k=5)
        by_logprob = sorted(dist, key=dist.get, reverse=True)
        assert [c.token for c in candidates] == by_logprob


class TestChat:
    def test_echo(self, mock_server):
        mock_server.chat_handler = lambda messages, model: messages[-1]["content"]
        reply = chat_complete(
            ep(mock_server.base_url), [ChatMessage(role="user", content="ping")]
        )
        assert reply.role == "assistant"
        assert reply.content == "ping"

    def test_stream_concatenation(self, mock_server):
        mock_server.chat_handler = lambda messages, model: "Hello"
        mock_server.stream_chunk = 3
        fragments = list(
            chat_stream(
                ep(mock_server.base_url), [ChatMessage(role="user", content="hi")]
            )
        )
        assert len(fragments) >= 2
        assert "".join(fragments) == "Hello"

    def test_stream_matches_non_streaming(self, mock_server):
        mock_server.chat_handler = lambda messages, model: "deterministic reply"
        messages = [ChatMessage(role="user", content="hi")]
        streamed = "".join(chat_stream(ep(mock_server.base_url), messages))
        assert streamed == chat_complete(ep(mock_server.base_url), messages).content

    def test_messages_must_end_with_user_turn(self, mock_server):
        messages = [
            ChatMessage(role="user", content="hi"),
            ChatMessage(role="assistant", content="hello"),
        ]
        with pytest.raises(ValueError):
            chat_complete(ep(mock_server.base_url), messages)
        # no request was issued
        assert mock_server.request_count() == 0


class TestHealthCheck:
    def test_healthy(self, mock_server):
        status = health_check(ep(mock_server.base_url))
        assert status.reachable
        assert status.supports_logprobs
        assert status.latency > 0

    def test_closed_port(self):
        status = health_check(ep("http://127.0.0.1:1"))
        assert not status.reachable

    def test_no_logprob_endpoint(self, mock_server):
        mock_server.no_logprobs = True
        status = health_check(ep(mock_server.base_url))
        assert status.reachable
        assert not status.supports_logprobs
