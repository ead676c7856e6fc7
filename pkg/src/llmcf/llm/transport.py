"""LLM transports: a chat-completions HTTP client and a deterministic mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Protocol

import httpx
import numpy as np

from .. import errors
from ..baselines import _unlike_order, context_for
from ..schema import Bounds, Dataset
from .parse import first_json_object
from .prompt import INSTANCE_MARKER

log = logging.getLogger(__name__)

API_KEY_ENV = "SENSECF_API_KEY"
RETRY_MARKER = "Note on your previous attempt:"

SYSTEM_PROMPT = ("You generate counterfactual explanations for tabular classifiers. "
                 "You always answer with a single JSON object.")


class LlmTransport(Protocol):
    def send(self, prompt: str) -> str:
        ...


@dataclass(frozen=True)
class TransportConfig:
    endpoint: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4o-mini"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    json_mode: bool = True
    backoff: float = 1.0


class HttpTransport:
    """POSTs to ``{endpoint}/chat/completions`` with a bearer token from the environment.

    Network errors, 429 and 5xx responses are retried with exponential
    backoff; anything left after ``max_retries`` raises ``TransportError``.
    """

    def __init__(self, config: TransportConfig | None = None, api_key: str | None = None,
                 client: httpx.Client | None = None):
        self.config = config or TransportConfig()
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not key:
            raise errors.DataError(f"set {API_KEY_ENV} to use the live transport")
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        self._client = client or httpx.Client(timeout=self.config.timeout)

    @property
    def url(self) -> str:
        return self.config.endpoint.rstrip("/") + "/chat/completions"

    def payload(self, prompt: str) -> dict:
        body = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        }
        if self.config.json_mode:
            body["response_format"] = {"type": "json_object"}
        return body

    def send(self, prompt: str) -> str:
        body = self.payload(prompt)
        last = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=body, headers=self._headers,
                                         timeout=self.config.timeout)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("chat request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("chat request returned %s (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise errors.TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise errors.TransportError(f"unexpected response body: {exc}") from None
        raise errors.TransportError(f"giving up after {self.config.max_retries + 1} attempts: {last}")


class MockTransport:
    """Answers with the factual's nearest unlike neighbour, serialized as JSON.

    The factual is read back from the prompt's instance line. Each retry note
    already in the prompt moves one step further down the neighbour ranking.
    With ``pool > 1`` a seeded draw among the ``pool`` nearest neighbours
    replaces the strict nearest. ``revert_immutables=False`` returns the
    neighbour verbatim, immutables included, to exercise repair paths.
    """

    def __init__(self, model, train: Dataset, bounds: Bounds | None = None, seed: int = 0,
                 pool: int = 1, revert_immutables: bool = True, preamble: str = ""):
        self.model = model
        self.train = train
        self.schema = train.schema
        self.ctx = context_for(model, train, bounds)
        self.seed = seed
        self.pool = max(1, pool)
        self.revert_immutables = revert_immutables
        self.preamble = preamble

    def _factual(self, prompt: str):
        at = prompt.find(INSTANCE_MARKER)
        if at < 0:
            raise errors.TransportError("mock transport: prompt has no instance line")
        obj = first_json_object(prompt[at + len(INSTANCE_MARKER):])
        return self.schema.instance_from_mapping(obj)

    def send(self, prompt: str) -> str:
        x = self._factual(prompt)
        retries = prompt.count(RETRY_MARKER)
        label = int(self.model.predict_many([x])[0][0])
        order = _unlike_order(x, label, self.ctx)
        rank = retries
        if self.pool > 1:
            key = json.dumps(self.schema.as_mapping(x), sort_keys=True)
            digest = int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
            rng = np.random.default_rng([self.seed, digest])
            rank += int(rng.integers(self.pool))
        nun = list(self.train.rows[int(order[min(rank, len(order) - 1)])])
        if self.revert_immutables:
            for j in self.schema.immutable_indices:
                nun[j] = x[j]
        body = json.dumps(self.schema.as_mapping(tuple(nun)))
        return f"{self.preamble}{body}" if self.preamble else body


class FailingTransport:
    """Raises on every call; useful for exercising failure accounting."""

    def __init__(self, exc: Exception | None = None):
        self.exc = exc or errors.TransportError("timed out")
        self.calls = 0

    def send(self, prompt: str) -> str:
        self.calls += 1
        raise self.exc
