import json
import os
import random

import httpx
import numpy as np
import pytest

from lingstego.errors import (InsufficientTopK, NondeterminismDetected, ProviderError,
                              ProviderUnavailable)
from lingstego.provider import PromptContext
from lingstego.remote import RemoteProvider, remote_next_scores
from lingstego.stega import EmbedConfig, extract, hide

URL = "http://scorer.test/v1/next"


def reply(tokens, logprobs, eos=0):
    return httpx.Response(200, json={"tokens": tokens, "logprobs": logprobs, "eos_token": eos})


def client_for(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_request_shape_and_sparse_scores():
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return reply([7, 3], [-0.1, -2.5], eos=2)

    ctx = PromptContext("imdb", ("One.", "Two."))
    scores, eos = remote_next_scores(URL, ctx, [4, 5], 2, client=client_for(handler), token="s3cret")
    assert seen["body"] == {"prompt": ctx.prompt, "prefix_tokens": [4, 5], "top_k": 2,
                            "deterministic": True}
    assert seen["auth"] == "Bearer s3cret"
    assert eos == 2
    assert scores.ids.tolist() == [3, 7]
    assert scores.values.tolist() == [-2.5, -0.1]


def test_retry_then_success():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("down")
        if len(calls) == 2:
            return httpx.Response(503)
        return reply([1], [0.0])

    scores, _ = remote_next_scores(URL, None, [], 1, client=client_for(handler), retries=3)
    assert len(calls) == 3
    assert scores.ids.tolist() == [1]


def test_retries_exhausted():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    with pytest.raises(ProviderUnavailable):
        remote_next_scores(URL, None, [], 1, client=client_for(handler), retries=2)
    assert len(calls) == 3


def test_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401)

    with pytest.raises(ProviderUnavailable):
        remote_next_scores(URL, None, [], 1, client=client_for(handler))
    assert len(calls) == 1


def test_top_k_enforced():
    def short(request):
        return reply(list(range(50)), [-1.0] * 50)

    def full(request):
        return reply(list(range(64)), [-1.0] * 64)

    with pytest.raises(InsufficientTopK):
        remote_next_scores(URL, None, [], 64, client=client_for(short))
    scores, _ = remote_next_scores(URL, None, [], 64, client=client_for(full))
    assert len(scores.ids) == 64


def test_malformed_responses():
    bad = [
        httpx.Response(200, text="not json"),
        httpx.Response(200, json={"tokens": [1, 2], "logprobs": [0.0], "eos_token": 0}),
        httpx.Response(200, text='{"tokens": [1], "logprobs": [NaN], "eos_token": 0}'),
        httpx.Response(200, json={"tokens": [1]}),
    ]
    for resp in bad:
        with pytest.raises(ProviderError):
            remote_next_scores(URL, None, [], 1, client=client_for(lambda r, resp=resp: resp))


def test_probe_detects_nondeterminism():
    counter = iter(range(100))

    def handler(request):
        return reply([1, 2], [0.0, -1.0 - next(counter)])

    with pytest.raises(NondeterminismDetected):
        RemoteProvider(URL, 2, client=client_for(handler)).probe()


def test_probe_accepts_stable_server():
    RemoteProvider(URL, 2, client=client_for(lambda r: reply([1, 2], [0.0, -1.0]))).probe()


def test_eos_change_detected():
    eos = iter([0, 5])
    provider = RemoteProvider(URL, 1, client=client_for(lambda r: reply([1], [0.0], eos=next(eos))))
    provider.next_scores(None, [])
    with pytest.raises(NondeterminismDetected):
        provider.next_scores(None, [])


def test_from_env(monkeypatch):
    monkeypatch.delenv("STEGO_LLM_ENDPOINT", raising=False)
    with pytest.raises(ProviderUnavailable):
        RemoteProvider.from_env()
    monkeypatch.setenv("STEGO_LLM_ENDPOINT", URL)
    monkeypatch.setenv("STEGO_LLM_TOKEN", "t")
    monkeypatch.setenv("STEGO_LLM_TIMEOUT_MS", "1500")
    p = RemoteProvider.from_env(top_k=8)
    assert (p.endpoint, p.token, p.timeout_ms, p.top_k) == (URL, "t", 1500, 8)
    p.close()


def toy_server(model, top_k):
    """Mock endpoint answering from the toy bigram (prompt ignored)."""

    def handler(request):
        body = json.loads(request.content)
        lp = model.log_probs(body["prefix_tokens"])
        order = np.lexsort((np.arange(len(lp)), -lp))[:body["top_k"]]
        return reply(order.tolist(), lp[order].tolist(), eos=model.eos_id)

    return client_for(handler)


def test_roundtrip_through_mock_server(base_model):
    provider = RemoteProvider(URL, 64, client=toy_server(base_model, 64))
    provider.probe()
    cfg = EmbedConfig()
    rng = random.Random(21)
    for _ in range(5):
        bits = [rng.randint(0, 1) for _ in range(rng.randint(0, 120))]
        env = hide(bits, provider, cfg)
        assert extract(env, provider, cfg, nbits=len(bits)) == bits
        assert provider.tokenize(env.text) == list(env.tokens)


@pytest.mark.skipif(not os.environ.get("STEGO_LLM_ENDPOINT"), reason="STEGO_LLM_ENDPOINT not set")
def test_live_endpoint_roundtrip():
    provider = RemoteProvider.from_env()
    provider.probe()
    cfg = EmbedConfig()
    rng = random.Random(0)
    bits = [rng.randint(0, 1) for _ in range(64)]
    env = hide(bits, provider, cfg)
    assert extract(env, provider, cfg, nbits=64) == bits
