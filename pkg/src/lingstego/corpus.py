"""Covertext corpus handling: sentence splitting, loading, digests."""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Iterable

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    """Split on ``.``, ``!`` or ``?`` followed by whitespace. Sentences are
    trimmed and empty ones dropped; line breaks count as whitespace."""
    out = []
    for chunk in _SENTENCE_END.split(text):
        chunk = " ".join(chunk.split())
        if chunk:
            out.append(chunk)
    return out


def load_corpus(path) -> list[str]:
    """Read a prepared corpus: UTF-8, one sentence per line."""
    text = Path(path).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def dump_corpus(sentences: Iterable[str]) -> str:
    return "".join(s + "\n" for s in sentences)


def corpus_digest(sentences: Iterable[str]) -> str:
    return hashlib.sha256(dump_corpus(sentences).encode("utf-8")).hexdigest()
