"""Embedding rate and imperceptibility metrics."""

from __future__ import annotations

import math
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyInput, SupportMismatch, ZeroProbabilityToken

_PUNCT = string.punctuation


def count_words(text: str) -> int:
    """Whitespace tokens with surrounding punctuation stripped; empty results
    are not words."""
    return sum(1 for w in text.split() if w.strip(_PUNCT))


@dataclass(frozen=True)
class BpwReport:
    total_bits: int
    total_words: int
    bpw: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class JsdReport:
    jsd: float
    sample_count: int
    positions: int
    log_base: int = 2

    def to_dict(self):
        return asdict(self)


def bpw(envelopes: Iterable, word_counter: Callable[[str], int] = count_words) -> BpwReport:
    envelopes = list(envelopes)
    if not envelopes:
        raise EmptyInput("no envelopes given")
    bits = sum(e.bits_consumed for e in envelopes)
    words = sum(word_counter(e.text) for e in envelopes)
    if words == 0:
        raise EmptyInput("stegotext contains no words")
    return BpwReport(bits, words, bits / words)


def _token_probability(scores, token: int) -> float:
    pos = np.searchsorted(scores.ids, token)
    if pos >= len(scores.ids) or scores.ids[pos] != token:
        return 0.0
    return float(scores.probabilities()[pos])


def perplexity(tokens: Sequence[int], provider, prompt=None) -> float:
    """``2 ** (-(1/n) * sum(log2 P(x_i | x_<i)))``."""
    if not tokens:
        raise EmptyInput("cannot score an empty sequence")
    logs = []
    for i, tok in enumerate(tokens):
        p = _token_probability(provider.next_scores(prompt, tokens[:i]), tok)
        if p <= 0:
            raise ZeroProbabilityToken(f"token {tok} at position {i} has probability 0", position=i)
        logs.append(math.log2(p))
    return 2.0 ** (-math.fsum(logs) / len(tokens))


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in bits; terms with p = 0 contribute nothing."""
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits, so the result lies in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise SupportMismatch(f"distributions have shapes {p.shape} and {q.shape}")
    for name, d in (("p", p), ("q", q)):
        if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a probability distribution")
    m = (p + q) / 2
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def _sequence_jsds(provider_a, provider_b, seq: Sequence[int], prompt) -> list[float]:
    out = []
    for i in range(len(seq)):
        a = provider_a.next_scores(prompt, seq[:i])
        b = provider_b.next_scores(prompt, seq[:i])
        if not np.array_equal(a.ids, b.ids):
            raise SupportMismatch(f"providers score different token sets at position {i}")
        out.append(jsd(a.probabilities(), b.probabilities()))
    return out


def corpus_jsd(provider_a, provider_b, samples: Sequence[Sequence[int]], prompt=None,
               workers: int = 1) -> JsdReport:
    """Mean per-position JSD between the two providers' next-token
    distributions over every prefix of every sample."""
    samples = [list(s) for s in samples]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            per_seq = list(ex.map(lambda s: _sequence_jsds(provider_a, provider_b, s, prompt), samples))
    else:
        per_seq = [_sequence_jsds(provider_a, provider_b, s, prompt) for s in samples]
    values = [v for seq in per_seq for v in seq]
    if not values:
        raise EmptyInput("no positions to score")
    return JsdReport(math.fsum(values) / len(values), len(samples), len(values))
