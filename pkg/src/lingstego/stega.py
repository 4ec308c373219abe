"""Hide a bitstream in generated text and extract it again.

Each generation step runs the same pipeline on both sides::

    scores -> adjust (repeat penalty, annealing temperature) -> prune by tau
           -> Huffman codebook -> pick / read the token's code

The receiver replays the pipeline token by token, so any difference in
provider, prompt context or config shows up as a stegotext token that is
missing from the reconstructed candidate pool.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .codec import HEADER_BITS, payload_length
from .errors import CapacityExceeded, TokenNotInPool, TruncatedStegotext
from .huffman import CandidatePool, build_codebook, code_of, match_prefix
from .provider import PromptContext, Provider, ScoreVector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbedConfig:
    tau: float = 0.005
    t0: float = 1.0
    alpha: float = 1.25
    delta0: float = 4.0
    beta: float = 0.5
    context_size: int = 2
    max_candidates: int = 64
    max_tokens: int = 256
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError("tau must be in (0, 1)")
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.delta0 < 0 or self.beta < 0:
            raise ValueError("delta0 and beta must be non-negative")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.context_size < 1:
            raise ValueError("context_size must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def digest(self) -> str:
        """SHA-256 over ``key=value`` lines in sorted key order."""
        lines = "".join(f"{k}={v!r}\n" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(lines.encode("ascii")).hexdigest()

    @classmethod
    def from_mapping(cls, values: dict) -> "EmbedConfig":
        kwargs = {}
        for f in fields(cls):
            if f.name in values:
                kwargs[f.name] = type(f.default)(values[f.name])
        return cls(**kwargs)


@dataclass
class EmbedState:
    temperature: float
    penalties: dict[int, float] = field(default_factory=dict)
    prev_pool_size: int | None = None
    generated: list[int] = field(default_factory=list)
    bits_consumed: int = 0


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """Adjusted distribution, sorted by descending probability then ascending id."""

    ids: np.ndarray
    probs: np.ndarray


@dataclass(frozen=True)
class StepTrace:
    temperature: float
    penalties: dict[int, float]
    pool: tuple[int, ...]
    selected: int
    code: tuple[int, ...]
    consumed: int
    embedding: bool = True


@dataclass(frozen=True)
class StegoEnvelope:
    tokens: tuple[int, ...]
    text: str
    bits_consumed: int
    seed: int
    config_digest: str
    corpus_id: str = ""
    sequence: int = 0

    def sidecar(self) -> str:
        return (
            f"corpus_id={self.corpus_id}\n"
            f"seed={self.seed}\n"
            f"config_digest={self.config_digest}\n"
            f"sequence={self.sequence}\n"
            f"bits_consumed={self.bits_consumed}\n"
        )

    @staticmethod
    def parse_sidecar(text: str) -> dict[str, str]:
        meta = {}
        for line in text.splitlines():
            if line.strip():
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"bad sidecar line: {line!r}")
                meta[key.strip()] = value.strip()
        return meta


# ---------------------------------------------------------------------------
# per-step adjustments


def adjust_distribution(scores: ScoreVector, state: EmbedState, config: EmbedConfig,
                        exclude: int | None = None) -> TokenDistribution:
    """``softmax((scores - penalties) / temperature)`` over the provider's
    support, optionally dropping one token (the end-of-sequence id)."""
    ids = scores.ids
    v = scores.values.astype(np.float64, copy=True)
    if state.penalties:
        toks = np.fromiter(state.penalties.keys(), dtype=np.int64, count=len(state.penalties))
        deltas = np.fromiter(state.penalties.values(), dtype=np.float64, count=len(state.penalties))
        pos = np.searchsorted(ids, toks)
        pos_c = np.minimum(pos, len(ids) - 1)
        hit = ids[pos_c] == toks
        v[pos_c[hit]] -= deltas[hit]
    v /= state.temperature
    if exclude is not None:
        keep = ids != exclude
        ids = ids[keep]
        v = v[keep]
    v -= v.max()
    e = np.exp(v)
    probs = e / e.sum()
    order = np.lexsort((ids, -probs))
    return TokenDistribution(ids[order], probs[order])


def step_temperature(state: EmbedState, config: EmbedConfig) -> float:
    if state.prev_pool_size == 1:
        return config.alpha * state.temperature
    return config.t0


def step_penalties(state: EmbedState, config: EmbedConfig, pool: CandidatePool,
                   selected: int) -> dict[int, float]:
    """Selected token -> ``delta0``; every other tracked token decays by
    ``beta`` and is dropped once it reaches zero."""
    out = {}
    for tok, d in state.penalties.items():
        d = max(0.0, d - config.beta)
        if d > 0:
            out[tok] = d
    if config.delta0 > 0:
        out[selected] = config.delta0
    else:
        out.pop(selected, None)
    return out


def prune(dist: TokenDistribution, config: EmbedConfig) -> CandidatePool:
    n = min(int(np.count_nonzero(dist.probs >= config.tau)), config.max_candidates)
    n = max(n, 1)
    p = dist.probs[:n]
    p = p / p.sum()
    return list(zip(dist.ids[:n].tolist(), p.tolist()))


def advance(state: EmbedState, config: EmbedConfig, pool: CandidatePool, selected: int) -> None:
    state.penalties = step_penalties(state, config, pool, selected)
    state.prev_pool_size = len(pool)
    state.temperature = step_temperature(state, config)
    state.generated.append(selected)


def _step(provider: Provider, context, state, config, embedding: bool):
    scores = provider.next_scores(context, state.generated)
    dist = adjust_distribution(scores, state, config, exclude=provider.eos_id if embedding else None)
    return prune(dist, config)


# ---------------------------------------------------------------------------
# hide / extract


def hide(payload: Sequence[int], provider: Provider, config: EmbedConfig,
         context: PromptContext | None = None, trace: list | None = None) -> StegoEnvelope:
    """Generate stegotext carrying ``payload``.

    End-of-sequence is kept out of the candidate pools until every payload bit
    is placed; afterwards the sentence is finished greedily (zero bits per
    token) until end-of-sequence or ``max_tokens``.
    """
    bits = list(payload)
    n = len(bits)
    state = EmbedState(config.t0)
    pos = 0
    while pos < n:
        if len(state.generated) >= config.max_tokens:
            raise CapacityExceeded(
                f"max_tokens={config.max_tokens} reached with {pos}/{n} bits embedded",
                bits_consumed=pos, tokens=len(state.generated))
        pool = _step(provider, context, state, config, embedding=True)
        book = build_codebook(pool)
        tok, used = match_prefix(book, bits, pos)
        if trace is not None:
            trace.append(StepTrace(state.temperature, dict(state.penalties),
                                   tuple(book.tokens), tok, book.codes[tok], used))
        pos += used
        advance(state, config, pool, tok)
    state.bits_consumed = pos

    while len(state.generated) < config.max_tokens:
        pool = _step(provider, context, state, config, embedding=False)
        tok = pool[0][0]
        if trace is not None:
            trace.append(StepTrace(state.temperature, dict(state.penalties),
                                   tuple(t for t, _ in pool), tok, (), 0, False))
        if tok == provider.eos_id:
            break
        advance(state, config, pool, tok)

    tokens = tuple(state.generated)
    return StegoEnvelope(
        tokens=tokens,
        text=provider.detokenize(tokens),
        bits_consumed=n,
        seed=config.seed,
        config_digest=config.digest(),
        corpus_id=context.corpus_id if context else "",
    )


def extract(envelope: StegoEnvelope | Sequence[int], provider: Provider, config: EmbedConfig,
            context: PromptContext | None = None, nbits: int | None = None) -> list[int]:
    """Recover the embedded bits.

    With ``nbits=None`` the stream is assumed framed: the first 56 recovered
    bits announce the total length. Trailing greedy-completion tokens are
    never read.
    """
    if isinstance(envelope, StegoEnvelope):
        tokens = envelope.tokens
        if envelope.config_digest and envelope.config_digest != config.digest():
            log.warning("envelope config digest %s does not match local config %s",
                        envelope.config_digest[:12], config.digest()[:12])
    else:
        tokens = tuple(envelope)
    framed = nbits is None
    needed = HEADER_BITS if framed else nbits
    header_read = False
    bits: list[int] = []
    state = EmbedState(config.t0)
    for step, tok in enumerate(tokens):
        if len(bits) >= needed:
            break
        pool = _step(provider, context, state, config, embedding=True)
        book = build_codebook(pool)
        if tok not in book:
            raise TokenNotInPool(
                f"step {step}: token {tok} not among the {len(pool)} reconstructed candidates "
                "(provider, prompt context, seed or config differ from the sender's)",
                step=step, token=tok)
        bits.extend(code_of(book, tok))
        if framed and not header_read and len(bits) >= HEADER_BITS:
            needed = payload_length(bits[:HEADER_BITS])
            header_read = True
        advance(state, config, pool, tok)
    if len(bits) < needed:
        raise TruncatedStegotext(f"stegotext ended after {len(bits)} of {needed} bits")
    return bits[:needed]
