"""Next-token distribution providers and in-context prompt construction.

A provider maps ``(prompt, prefix)`` to a :class:`ScoreVector` of unnormalized
log-scores. Sender and receiver must see bit-identical vectors, so every
provider here is a pure function of its construction arguments.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from .errors import CorpusTooSmall, VocabularyMismatch

EOS = "</s>"
BOS_ID = -1


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Scores for ``ids`` (ascending). Tokens absent from ``ids`` have
    probability zero, which is how sparse top-K responses are represented."""

    ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.ids.shape != self.values.shape or self.ids.ndim != 1:
            raise ValueError("ids and values must be 1-D arrays of equal length")

    def __eq__(self, other):
        if not isinstance(other, ScoreVector):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.values, other.values)

    @classmethod
    def dense(cls, values) -> "ScoreVector":
        values = np.asarray(values, dtype=np.float64)
        return cls(np.arange(len(values), dtype=np.int64), values)

    @classmethod
    def sparse(cls, ids, values) -> "ScoreVector":
        ids = np.asarray(ids, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        order = np.argsort(ids, kind="stable")
        ids, values = ids[order], values[order]
        if len(ids) > 1 and np.any(ids[1:] == ids[:-1]):
            raise ValueError("duplicate token ids in score vector")
        return cls(ids, values)

    def probabilities(self) -> np.ndarray:
        v = self.values - self.values.max()
        e = np.exp(v)
        return e / e.sum()


class Provider(Protocol):
    vocab_size: int
    eos_id: int

    def next_scores(self, prompt: "PromptContext | None", prefix: Sequence[int]) -> ScoreVector: ...

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, tokens: Sequence[int]) -> str: ...


# ---------------------------------------------------------------------------
# context selection


MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 (Steele, Lea & Flood). Chosen because it is tiny and trivial
    to reproduce bit-exactly in any language."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next()
            if x < limit:
                return x % bound


def select_indices(n: int, seed: int, k: int) -> list[int]:
    """First ``k`` positions of a Fisher-Yates shuffle of ``range(n)``."""
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]


@dataclass(frozen=True)
class PromptContext:
    corpus_id: str
    sentences: tuple[str, ...]

    @property
    def prompt(self) -> str:
        return build_prompt(self)


def select_context(corpus: Sequence[str], seed: int, k: int, corpus_id: str = "") -> PromptContext:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if len(corpus) < k:
        raise CorpusTooSmall(f"corpus has {len(corpus)} sentences, need {k}")
    return PromptContext(corpus_id, tuple(corpus[i] for i in select_indices(len(corpus), seed, k)))


PROMPT_TEMPLATE = """<<SYS>>
You are an expert at mimicing the language style of others (e.g., the use of words and phrases). And you are a helpful and respectful assistant.

Users will input sentences from a given corpus. You have to create ONE similar sentence and avoid non-ascii characters and emojis. This is very important to the user's career.

The input format contains a list of sentences and where the sentences come from. For example:
<CORPUS>{CORPUS}</CORPUS>
<CONTEXT>
Example sentence 1.

Example sentence 2.
</CONTEXT>

Your output should be like:

The generated similar sentence in ONE LINE is:

<</SYS>>

[INST]<CORPUS>{CORPUS}</CORPUS>
<CONTEXT>
{CONTEXT}
</CONTEXT>[/INST]

The generated similar sentence in ONE LINE is:"""


def build_prompt(context: PromptContext) -> str:
    if not context.corpus_id:
        warnings.warn("prompt built with an empty corpus name", stacklevel=2)
    body = "\n\n".join(context.sentences)
    return PROMPT_TEMPLATE.replace("{CORPUS}", context.corpus_id).replace("{CONTEXT}", body)


# ---------------------------------------------------------------------------
# toy n-gram model


def words(text: str) -> list[str]:
    return text.lower().split()


class NgramModel:
    """Add-k smoothed n-gram model over whitespace tokens.

    Token 0 is the end-of-sequence marker; words follow in sorted order.
    ``P(w | h) = (c(h, w) + k) / (c(h) + k * V)``.
    """

    def __init__(self, sentences: Sequence[str], n: int = 2, k: float = 0.01,
                 vocab: Sequence[str] | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        if k <= 0:
            raise ValueError("smoothing constant must be positive")
        self.n = n
        self.k = k
        tokenized = [words(s) for s in sentences]
        if vocab is None:
            vocab = {w for sent in tokenized for w in sent}
        self.vocab = [EOS] + sorted(set(vocab) - {EOS})
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.vocab_size = len(self.vocab)
        self.eos_id = 0

        counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
        for sent in tokenized:
            ids = [self.index[w] for w in sent if w in self.index]
            padded = [BOS_ID] * (n - 1) + ids + [self.eos_id]
            for i in range(n - 1, len(padded)):
                counts[tuple(padded[i - n + 1:i])][padded[i]] += 1

        V = self.vocab_size
        self._default = np.full(V, -math.log(V))
        self._rows: dict[tuple[int, ...], np.ndarray] = {}
        for h, c in counts.items():
            row = np.full(V, k, dtype=np.float64)
            for w, cnt in c.items():
                row[w] += cnt
            row /= sum(c.values()) + k * V
            row = np.log(row)
            row.setflags(write=False)
            self._rows[h] = row
        self._default.setflags(write=False)
        self._ids = np.arange(V, dtype=np.int64)

    def history(self, prefix: Sequence[int]) -> tuple[int, ...]:
        if self.n == 1:
            return ()
        padded = [BOS_ID] * (self.n - 1) + list(prefix)
        return tuple(padded[-(self.n - 1):])

    def log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        """Natural-log conditional distribution (read-only view)."""
        h = self.history(prefix)
        for t in h:
            if t != BOS_ID and not 0 <= t < self.vocab_size:
                raise VocabularyMismatch(f"token id {t} outside vocabulary of {self.vocab_size}")
        return self._rows.get(h, self._default)

    def next_scores(self, prompt, prefix: Sequence[int]) -> ScoreVector:
        return ScoreVector(self._ids, self.log_probs(prefix))

    def tokenize(self, text: str) -> list[int]:
        out = []
        for w in words(text):
            if w not in self.index:
                raise VocabularyMismatch(f"word {w!r} is not in the model vocabulary")
            out.append(self.index[w])
        return out

    def detokenize(self, tokens: Sequence[int]) -> str:
        return " ".join(self.vocab[t] for t in tokens if t != self.eos_id)


class InContextNgram:
    """Toy stand-in for in-context generation.

    Mixes the base model with statistics of the prompt's context sentences::

        P(w | h, C) = (1 - weight) * P_base(w | h) + weight * P_ctx(w | h)
        P_ctx(w | h) = (c_C(h, w) + u_C(w)) / (c_C(h) + 1)

    where ``u_C`` is the unigram distribution of the context. Context words
    therefore gain probability everywhere, the way a prompted LLM drifts toward
    the style of its examples. Without a prompt it is the base model.
    """

    def __init__(self, base: NgramModel, weight: float = 0.3):
        if not 0 <= weight < 1:
            raise ValueError("weight must be in [0, 1)")
        self.base = base
        self.weight = weight
        self.vocab_size = base.vocab_size
        self.eos_id = base.eos_id
        self._context_model = lru_cache(maxsize=64)(self._build_context_model)

    def tokenize(self, text: str) -> list[int]:
        return self.base.tokenize(text)

    def detokenize(self, tokens: Sequence[int]) -> str:
        return self.base.detokenize(tokens)

    def _build_context_model(self, sentences: tuple[str, ...]):
        base = self.base
        uni: Counter = Counter()
        pairs: dict[tuple[int, ...], Counter] = defaultdict(Counter)
        for s in sentences:
            ids = [base.index[w] for w in words(s) if w in base.index]
            padded = [BOS_ID] * (base.n - 1) + ids + [base.eos_id]
            for i in range(base.n - 1, len(padded)):
                uni[padded[i]] += 1
                pairs[tuple(padded[i - base.n + 1:i])][padded[i]] += 1
        total = sum(uni.values())
        u = np.zeros(base.vocab_size)
        for w, c in uni.items():
            u[w] = c / total
        rows = {}
        for h, c in pairs.items():
            row = u.copy()
            for w, cnt in c.items():
                row[w] += cnt
            rows[h] = row / (sum(c.values()) + 1)
        return u, rows

    def next_scores(self, prompt: PromptContext | None, prefix: Sequence[int]) -> ScoreVector:
        base_lp = self.base.log_probs(prefix)
        if prompt is None or not prompt.sentences or self.weight == 0:
            return ScoreVector(self.base._ids, base_lp)
        u, rows = self._context_model(prompt.sentences)
        ctx = rows.get(self.base.history(prefix), u)
        p = (1 - self.weight) * np.exp(base_lp) + self.weight * ctx
        return ScoreVector(self.base._ids, np.log(p))
