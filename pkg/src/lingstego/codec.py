"""Secret text <-> framed bitstream.

Bitstreams are plain ``list[int]`` of 0/1 values. The pipeline on the sending
side is ``compress_text -> ef_multiround -> frame_payload``; the receiver runs
``unframe_payload -> ef_decode (rounds times) -> decompress_text``.

Payload layout (56-bit header, big-endian, never EF-coded)::

    magic 0xA7 (8) | version 1 (4) | ef_rounds (4) | codec_id (8) | body_len (32) | body
"""

from __future__ import annotations

import functools
import heapq
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BadMagic, MalformedBitstream, TruncatedPayload, UnsupportedVersion

Bits = list[int]

MAGIC = 0xA7
VERSION = 1
HEADER_BITS = 56
MAX_EF_ROUNDS = 15

CODEC_RAW = 0
CODEC_HUFFMAN = 1
CODECS = (CODEC_RAW, CODEC_HUFFMAN)


# ---------------------------------------------------------------------------
# bit helpers


def bits_from_str(s: str) -> Bits:
    """``"0110" -> [0, 1, 1, 0]``; whitespace is ignored."""
    out = []
    for ch in s:
        if ch in "01":
            out.append(ord(ch) - 48)
        elif not ch.isspace():
            raise ValueError(f"not a bit character: {ch!r}")
    return out


def bits_to_str(bits: Iterable[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def int_to_bits(value: int, width: int) -> Bits:
    if value < 0 or value >= 1 << width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


def bits_to_bytes(bits: Sequence[int]) -> tuple[bytes, int]:
    """Pack MSB-first, zero-padding the last byte. Returns ``(data, nbits)``."""
    n = len(bits)
    out = bytearray((n + 7) // 8)
    for i, b in enumerate(bits):
        if b:
            out[i >> 3] |= 0x80 >> (i & 7)
    return bytes(out), n


def bytes_to_bits(data: bytes, nbits: int | None = None) -> Bits:
    if nbits is None:
        nbits = len(data) * 8
    if nbits > len(data) * 8:
        raise ValueError("nbits exceeds available data")
    return [(data[i >> 3] >> (7 - (i & 7))) & 1 for i in range(nbits)]


# ---------------------------------------------------------------------------
# Edge-Flipping coding


def ef_encode(bits: Sequence[int]) -> Bits:
    """Mark every position where the stream changes value (state starts at 0)."""
    out = []
    s = 0
    for b in bits:
        out.append(0 if b == s else 1)
        s = b
    return out


def ef_decode(bits: Sequence[int]) -> Bits:
    out = []
    s = 0
    for b in bits:
        if b:
            s ^= 1
        out.append(s)
    return out


def ef_multiround(bits: Sequence[int], max_rounds: int = MAX_EF_ROUNDS) -> tuple[Bits, int]:
    """Iterate ``ef_encode`` up to ``max_rounds`` times and keep the iterate with
    the fewest ones. Ties go to the smaller round count; ``0`` means the input
    itself was best."""
    if not 1 <= max_rounds <= MAX_EF_ROUNDS:
        raise ValueError(f"max_rounds must be in 1..{MAX_EF_ROUNDS}, got {max_rounds}")
    best = list(bits)
    best_ones = sum(best)
    best_rounds = 0
    cur = best
    for r in range(1, max_rounds + 1):
        cur = ef_encode(cur)
        ones = sum(cur)
        if ones < best_ones:
            best, best_ones, best_rounds = cur, ones, r
    return best, best_rounds


def ef_undo(bits: Sequence[int], rounds: int) -> Bits:
    out = list(bits)
    for _ in range(rounds):
        out = ef_decode(out)
    return out


# ---------------------------------------------------------------------------
# static byte-level Huffman


@dataclass(frozen=True)
class FrequencyTable:
    """Byte-value counts, add-one smoothed so every byte is encodable."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != 256:
            raise ValueError("frequency table needs exactly 256 counts")
        if min(self.counts) < 1:
            raise ValueError("frequency table must be smoothed (all counts >= 1)")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FrequencyTable":
        counts = [1] * 256
        for b in data:
            counts[b] += 1
        return cls(tuple(counts))

    @classmethod
    def from_text(cls, text: str) -> "FrequencyTable":
        return cls.from_bytes(text.encode("utf-8"))

    @classmethod
    def uniform(cls) -> "FrequencyTable":
        return cls((1,) * 256)

    def dumps(self) -> str:
        return "".join(f"{b}\t{c}\n" for b, c in enumerate(self.counts))

    @classmethod
    def loads(cls, text: str) -> "FrequencyTable":
        counts = [0] * 256
        seen = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                b, c = line.split("\t")
                b, c = int(b), int(c)
            except ValueError:
                raise ValueError(f"line {lineno}: expected '<byte>\\t<count>'") from None
            if not 0 <= b <= 255 or b in seen:
                raise ValueError(f"line {lineno}: bad or duplicate byte value {b}")
            seen.add(b)
            counts[b] = c
        if len(seen) != 256:
            raise ValueError(f"frequency table lists {len(seen)} byte values, need 256")
        return cls(tuple(counts))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FrequencyTable":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def huffman_code_lengths(counts: Sequence[int]) -> list[int]:
    """Code length per symbol. Equal weights pop leaves in ascending symbol
    order, then internal nodes in creation order."""
    n = len(counts)
    if n == 1:
        return [1]
    heap = [(c, sym, [sym]) for sym, c in enumerate(counts)]
    heapq.heapify(heap)
    lengths = [0] * n
    seq = n
    while len(heap) > 1:
        c1, _, s1 = heapq.heappop(heap)
        c2, _, s2 = heapq.heappop(heap)
        for s in s1:
            lengths[s] += 1
        for s in s2:
            lengths[s] += 1
        heapq.heappush(heap, (c1 + c2, seq, s1 + s2))
        seq += 1
    return lengths


def canonical_codes(lengths: Sequence[int]) -> dict[int, tuple[int, int]]:
    """Canonical code assignment: symbol -> (code value, length), ordered by
    (length, symbol)."""
    order = sorted(range(len(lengths)), key=lambda s: (lengths[s], s))
    codes = {}
    code = 0
    prev_len = lengths[order[0]]
    for i, sym in enumerate(order):
        ln = lengths[sym]
        if i:
            code = (code + 1) << (ln - prev_len)
        codes[sym] = (code, ln)
        prev_len = ln
    return codes


@functools.lru_cache(maxsize=32)
def _static_tables(counts: tuple[int, ...]):
    codes = canonical_codes(huffman_code_lengths(counts))
    encode = {sym: int_to_bits(v, ln) for sym, (v, ln) in codes.items()}
    decode = {(v, ln): sym for sym, (v, ln) in codes.items()}
    return encode, decode, max(ln for _, ln in codes.values())


def compress_text(text: str, table: FrequencyTable | None = None, codec_id: int = CODEC_RAW) -> Bits:
    data = text.encode("utf-8")
    if codec_id == CODEC_RAW:
        return bytes_to_bits(data)
    if codec_id == CODEC_HUFFMAN:
        if table is None:
            raise ValueError("huffman codec needs a frequency table")
        encode, _, _ = _static_tables(table.counts)
        out: Bits = []
        for b in data:
            out.extend(encode[b])
        return out
    raise ValueError(f"unknown codec_id {codec_id}")


def decompress_text(bits: Sequence[int], table: FrequencyTable | None = None, codec_id: int = CODEC_RAW) -> str:
    if codec_id == CODEC_RAW:
        if len(bits) % 8:
            raise MalformedBitstream(f"raw body of {len(bits)} bits is not byte aligned")
        data = bits_to_bytes(bits)[0]
    elif codec_id == CODEC_HUFFMAN:
        if table is None:
            raise ValueError("huffman codec needs a frequency table")
        _, decode, max_len = _static_tables(table.counts)
        out = bytearray()
        v = ln = 0
        for b in bits:
            v = (v << 1) | b
            ln += 1
            sym = decode.get((v, ln))
            if sym is not None:
                out.append(sym)
                v = ln = 0
            elif ln > max_len:
                raise MalformedBitstream("bit pattern matches no code")
        if ln:
            raise MalformedBitstream("bitstream ends inside a codeword")
        data = bytes(out)
    else:
        raise ValueError(f"unknown codec_id {codec_id}")
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedBitstream(f"body is not valid UTF-8: {e}") from None


# ---------------------------------------------------------------------------
# framing


@dataclass(frozen=True)
class SecretPayload:
    ef_rounds: int
    codec_id: int
    body: tuple[int, ...]
    magic: int = MAGIC
    version: int = VERSION

    @property
    def body_len(self) -> int:
        return len(self.body)


def frame_payload(body: Sequence[int], ef_rounds: int = 0, codec_id: int = CODEC_RAW) -> Bits:
    if not 0 <= ef_rounds <= MAX_EF_ROUNDS:
        raise ValueError(f"ef_rounds must be in 0..{MAX_EF_ROUNDS}")
    if not 0 <= codec_id <= 255:
        raise ValueError("codec_id must fit in 8 bits")
    header = (
        int_to_bits(MAGIC, 8)
        + int_to_bits(VERSION, 4)
        + int_to_bits(ef_rounds, 4)
        + int_to_bits(codec_id, 8)
        + int_to_bits(len(body), 32)
    )
    return header + list(body)


def payload_length(header: Sequence[int]) -> int:
    """Total framed length (header + body) announced by the first 56 bits."""
    if len(header) < HEADER_BITS:
        raise TruncatedPayload("header incomplete")
    return HEADER_BITS + bits_to_int(header[24:56])


def unframe_payload(bits: Sequence[int]) -> SecretPayload:
    """Parse a framed stream. Bits past ``body_len`` are ignored."""
    if len(bits) < 8:
        raise TruncatedPayload(f"only {len(bits)} bits, header needs {HEADER_BITS}")
    magic = bits_to_int(bits[:8])
    if magic != MAGIC:
        raise BadMagic(f"magic 0x{magic:02X} != 0x{MAGIC:02X}")
    if len(bits) < HEADER_BITS:
        raise TruncatedPayload(f"only {len(bits)} bits, header needs {HEADER_BITS}")
    version = bits_to_int(bits[8:12])
    if version != VERSION:
        raise UnsupportedVersion(f"payload version {version}, expected {VERSION}")
    ef_rounds = bits_to_int(bits[12:16])
    codec_id = bits_to_int(bits[16:24])
    body_len = bits_to_int(bits[24:56])
    if len(bits) - HEADER_BITS < body_len:
        raise TruncatedPayload(f"body_len {body_len} but only {len(bits) - HEADER_BITS} body bits")
    if codec_id not in CODECS:
        raise MalformedBitstream(f"unknown codec_id {codec_id}")
    return SecretPayload(ef_rounds, codec_id, tuple(bits[HEADER_BITS:HEADER_BITS + body_len]))


def encode_secret(text: str, table: FrequencyTable | None = None, codec_id: int = CODEC_RAW,
                  max_rounds: int = MAX_EF_ROUNDS) -> tuple[Bits, int]:
    """Compress and EF-code ``text``. Returns ``(body, rounds)`` ready for framing."""
    raw = compress_text(text, table, codec_id)
    if max_rounds == 0:
        return raw, 0
    return ef_multiround(raw, max_rounds)


def decode_secret(body: Sequence[int], rounds: int, table: FrequencyTable | None = None,
                  codec_id: int = CODEC_RAW) -> str:
    return decompress_text(ef_undo(body, rounds), table, codec_id)
