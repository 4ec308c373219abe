"""Client for a remote next-token scoring endpoint.

Wire protocol (HTTP POST, JSON)::

    request  {"prompt": str, "prefix_tokens": [int], "top_k": int, "deterministic": true}
    response {"tokens": [int], "logprobs": [float], "eos_token": int}

Configuration comes from ``STEGO_LLM_ENDPOINT``, ``STEGO_LLM_TOKEN`` and
``STEGO_LLM_TIMEOUT_MS``.
"""

from __future__ import annotations

import logging
import math
import os
from typing import Sequence

import httpx
import numpy as np

from .errors import (InsufficientTopK, NondeterminismDetected, ProviderError,
                     ProviderUnavailable, VocabularyMismatch)
from .provider import PromptContext, ScoreVector, build_prompt

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30_000


def _prompt_text(prompt) -> str:
    if prompt is None:
        return ""
    if isinstance(prompt, PromptContext):
        return build_prompt(prompt)
    return str(prompt)


def remote_next_scores(endpoint: str, prompt, prefix: Sequence[int], top_k: int, *,
                       client: httpx.Client | None = None, token: str | None = None,
                       timeout_ms: int = DEFAULT_TIMEOUT_MS, retries: int = 3) -> tuple[ScoreVector, int]:
    """One scoring request. Returns the sparse top-K scores and the server's
    end-of-sequence id. Transport failures and 5xx replies are retried; the
    request is read-only so repeating it is safe."""
    body = {
        "prompt": _prompt_text(prompt),
        "prefix_tokens": [int(t) for t in prefix],
        "top_k": int(top_k),
        "deterministic": True,
    }
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=timeout_ms / 1000)
    try:
        last_err = None
        for attempt in range(retries + 1):
            try:
                resp = client.post(endpoint, json=body, headers=headers)
            except httpx.TransportError as e:
                last_err = e
                log.warning("scoring request failed (attempt %d/%d): %s", attempt + 1, retries + 1, e)
                continue
            if resp.status_code >= 500:
                last_err = f"HTTP {resp.status_code}"
                log.warning("scoring endpoint returned %d (attempt %d/%d)",
                            resp.status_code, attempt + 1, retries + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderUnavailable(f"scoring endpoint rejected request: HTTP {resp.status_code}")
            return _parse_response(resp, top_k)
        raise ProviderUnavailable(f"scoring endpoint unreachable after {retries + 1} attempts: {last_err}")
    finally:
        if own_client:
            client.close()


def _parse_response(resp: httpx.Response, top_k: int) -> tuple[ScoreVector, int]:
    try:
        data = resp.json()
        tokens = [int(t) for t in data["tokens"]]
        logprobs = [float(x) for x in data["logprobs"]]
        eos = int(data["eos_token"])
    except (ValueError, KeyError, TypeError) as e:
        raise ProviderError(f"malformed scoring response: {e}") from None
    if len(tokens) != len(logprobs):
        raise ProviderError("response tokens and logprobs differ in length")
    if len(tokens) < top_k:
        raise InsufficientTopK(f"requested top_k={top_k}, server returned {len(tokens)}")
    if not all(math.isfinite(x) for x in logprobs):
        raise ProviderError("response contains non-finite logprobs")
    if any(t < 0 for t in tokens):
        raise VocabularyMismatch("negative token id in response")
    return ScoreVector.sparse(tokens, logprobs), eos


class RemoteProvider:
    """Provider backed by :func:`remote_next_scores`.

    The remote protocol has no tokenizer, so stegotext is rendered as the
    space-separated token ids.
    """

    vocab_size = None

    def __init__(self, endpoint: str, top_k: int = 64, *, token: str | None = None,
                 timeout_ms: int = DEFAULT_TIMEOUT_MS, retries: int = 3,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.top_k = top_k
        self.token = token
        self.timeout_ms = timeout_ms
        self.retries = retries
        self.client = client or httpx.Client(timeout=timeout_ms / 1000)
        self.eos_id: int | None = None

    @classmethod
    def from_env(cls, top_k: int = 64, **kwargs) -> "RemoteProvider":
        endpoint = os.environ.get("STEGO_LLM_ENDPOINT")
        if not endpoint:
            raise ProviderUnavailable("STEGO_LLM_ENDPOINT is not set")
        timeout = int(os.environ.get("STEGO_LLM_TIMEOUT_MS", DEFAULT_TIMEOUT_MS))
        return cls(endpoint, top_k, token=os.environ.get("STEGO_LLM_TOKEN"), timeout_ms=timeout, **kwargs)

    def next_scores(self, prompt, prefix: Sequence[int]) -> ScoreVector:
        scores, eos = remote_next_scores(self.endpoint, prompt, prefix, self.top_k, client=self.client,
                                         token=self.token, timeout_ms=self.timeout_ms, retries=self.retries)
        if self.eos_id is None:
            self.eos_id = eos
        elif eos != self.eos_id:
            raise NondeterminismDetected(f"server changed eos_token from {self.eos_id} to {eos}")
        return scores

    def probe(self, prompt=None, prefix: Sequence[int] = ()) -> None:
        """Score the same input twice and fail fast if the replies differ."""
        first = self.next_scores(prompt, prefix)
        second = self.next_scores(prompt, prefix)
        if first != second:
            diff = np.setxor1d(first.ids, second.ids)
            raise NondeterminismDetected(
                "two identical scoring requests disagreed "
                f"({len(diff)} token ids differ; sampling must be disabled on the server)")

    def tokenize(self, text: str) -> list[int]:
        try:
            return [int(t) for t in text.split()]
        except ValueError:
            raise VocabularyMismatch("remote stegotext must be space-separated token ids") from None

    def detokenize(self, tokens: Sequence[int]) -> str:
        return " ".join(str(t) for t in tokens if t != self.eos_id)

    def close(self):
        self.client.close()
