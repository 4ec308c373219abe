"""Secret text <-> chained stego envelopes.

Sending: compress -> multi-round EF -> split into chunks -> frame each chunk
-> hide. Every chunk travels in its own envelope whose prompt context is drawn
with seed ``seed + sequence`` so chained envelopes do not share a prompt.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Sequence

from .codec import HEADER_BITS, FrequencyTable, decode_secret, encode_secret, frame_payload, unframe_payload
from .errors import CapacityExceeded, CodecError, StegoError
from .provider import MASK64, select_context
from .stega import EmbedConfig, StegoEnvelope, extract, hide

log = logging.getLogger(__name__)


def envelope_seed(seed: int, sequence: int) -> int:
    return (seed + sequence) & MASK64


class EnvelopeError(StegoError):
    """Wraps a failure with the index of the envelope it came from."""

    def __init__(self, index: int, cause: StegoError):
        super().__init__(f"envelope {index}: {cause}")
        self.index = index
        self.cause = cause
        self.code = cause.code


def _hide_chunk(chunk, rounds, codec_id, provider, config, corpus, corpus_id, seq):
    ctx = select_context(corpus, envelope_seed(config.seed, seq), config.context_size, corpus_id)
    env = hide(frame_payload(chunk, rounds, codec_id), provider, config, ctx)
    return replace(env, seed=envelope_seed(config.seed, seq), sequence=seq)


def hide_secret(text: str, provider, config: EmbedConfig, corpus: Sequence[str], *,
                corpus_id: str = "", table: FrequencyTable | None = None,
                codec_id: int = 1, max_rounds: int = 15) -> list[StegoEnvelope]:
    body, rounds = encode_secret(text, table, codec_id, max_rounds)
    envelopes = []
    pos = 0
    while True:
        size = len(body) - pos
        while True:
            try:
                env = _hide_chunk(body[pos:pos + size], rounds, codec_id, provider, config,
                                  corpus, corpus_id, len(envelopes))
                break
            except CapacityExceeded as e:
                if size == 0:
                    raise CapacityExceeded(
                        f"max_tokens={config.max_tokens} cannot carry even an empty payload header",
                        e.bits_consumed, e.tokens) from None
                usable = e.bits_consumed - HEADER_BITS
                size = min(size - 1, usable) if usable > 0 else size // 2
                log.debug("envelope %d: retrying with %d body bits", len(envelopes), size)
        envelopes.append(env)
        pos += size
        if pos >= len(body):
            return envelopes


def extract_secret(envelopes: Sequence[StegoEnvelope], provider, config: EmbedConfig,
                   corpus: Sequence[str], *, corpus_id: str = "",
                   table: FrequencyTable | None = None) -> str:
    """Envelopes must be given in chain order; their ``sequence`` selects the
    prompt context."""
    body: list[int] = []
    header = None
    for i, env in enumerate(envelopes):
        try:
            ctx = select_context(corpus, envelope_seed(config.seed, env.sequence),
                                 config.context_size, corpus_id)
            payload = unframe_payload(extract(env, provider, config, ctx))
        except StegoError as e:
            raise EnvelopeError(i, e) from e
        if header is None:
            header = (payload.ef_rounds, payload.codec_id)
        elif header != (payload.ef_rounds, payload.codec_id):
            raise EnvelopeError(i, CodecError("chained envelopes disagree on ef_rounds/codec_id"))
        body.extend(payload.body)
    if header is None:
        raise ValueError("no envelopes given")
    rounds, codec_id = header
    return decode_secret(body, rounds, table, codec_id)
