"""Transports: replay from fixtures, live chat-completion calls, or record both."""

from __future__ import annotations

import os
from dataclasses import dataclass

import httpx

from prefplan.llm.fixtures import FixtureStore
from prefplan.llm.prompt import PromptBundle
from prefplan.llm.response import blocks


class TransportError(Exception):
    pass


@dataclass(frozen=True)
class Completion:
    text: str
    candidate_scores: tuple[float, ...] | None = None


class ReplayTransport:
    """Answers only from recorded fixtures; a missing fixture raises, never falls back."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def complete(self, prompt: PromptBundle, logprobs: bool = False) -> Completion:
        fx = self.store.lookup(prompt.text)
        return Completion(fx.response_text, fx.candidate_scores)


def line_logprobs(text: str, tokens: list[tuple[str, float]], label: str = "CANDIDATES") -> list[float]:
    """Summed token log-probabilities of every line in the ``label`` block.

    ``tokens`` are (token text, log-prob) pairs that concatenate to ``text``.
    A token counts towards a line when it overlaps the line's characters.
    """
    body = blocks(text).get(label)
    if body is None:
        return []
    start = text.replace("\r\n", "\n").index(body)
    spans = []
    pos = start
    for ln in body.split("\n"):
        stripped = ln.strip()
        if stripped:
            off = pos + ln.index(stripped)
            spans.append((off, off + len(stripped)))
        pos += len(ln) + 1
    sums = [0.0] * len(spans)
    cursor = 0
    for tok, lp in tokens:
        a, b = cursor, cursor + len(tok)
        cursor = b
        for i, (s, e) in enumerate(spans):
            if a < e and b > s:
                sums[i] += float(lp)
    return sums


class LiveTransport:
    """Chat-completion client configured from LLM_ENDPOINT, LLM_MODEL and LLM_API_KEY."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        temperature: float = 0.0,
        max_tokens: int = 2048,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        url = endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        self.url = url
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_env(cls, **kw) -> LiveTransport:
        endpoint = os.environ.get("LLM_ENDPOINT")
        model = os.environ.get("LLM_MODEL")
        if not endpoint or not model:
            raise TransportError("live transport needs LLM_ENDPOINT and LLM_MODEL")
        return cls(endpoint, model, os.environ.get("LLM_API_KEY", ""), **kw)

    def request_body(self, prompt: PromptBundle, logprobs: bool = False) -> dict:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if logprobs:
            body["logprobs"] = True
        return body

    def complete(self, prompt: PromptBundle, logprobs: bool = False) -> Completion:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            r = self.client.post(self.url, json=self.request_body(prompt, logprobs), headers=headers)
            r.raise_for_status()
            doc = r.json()
            choice = doc["choices"][0]
            text = choice["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as e:
            raise TransportError(f"chat completion failed: {e}") from e
        scores = None
        if logprobs:
            toks = (choice.get("logprobs") or {}).get("content") or []
            scores = tuple(line_logprobs(text, [(t["token"], t["logprob"]) for t in toks]))
        return Completion(text, scores)


class RecordingTransport:
    """Forwards to a live transport and stores every answer as a fixture."""

    def __init__(self, inner, store: FixtureStore):
        self.inner = inner
        self.store = store

    def complete(self, prompt: PromptBundle, logprobs: bool = False) -> Completion:
        c = self.inner.complete(prompt, logprobs)
        self.store.record(prompt.text, c.text, c.candidate_scores)
        return c
