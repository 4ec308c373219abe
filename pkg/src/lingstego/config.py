"""Run configuration: flat ``key=value`` files with command-line overrides."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .stega import EmbedConfig


class ConfigError(ValueError):
    code = "config-error"


@dataclass(frozen=True)
class RunConfig:
    # embedding
    tau: float = 0.005
    t0: float = 1.0
    alpha: float = 1.25
    delta0: float = 4.0
    beta: float = 0.5
    context_size: int = 2
    max_candidates: int = 64
    max_tokens: int = 256
    seed: int = 0
    # secret codec
    codec_id: int = 1
    ef_rounds: int = 15
    # provider
    provider: str = "toy"
    corpus: str = ""
    ngram_order: int = 2
    smoothing: float = 0.01
    context_weight: float = 0.3
    # outputs
    out: str = "envelopes"

    def __post_init__(self):
        if self.provider not in ("toy", "remote"):
            raise ConfigError(f"provider must be 'toy' or 'remote', not {self.provider!r}")
        if self.codec_id not in (0, 1):
            raise ConfigError("codec_id must be 0 (raw) or 1 (huffman)")
        if not 0 <= self.ef_rounds <= 15:
            raise ConfigError("ef_rounds must be in 0..15")
        try:
            self.embed_config()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def embed_config(self) -> EmbedConfig:
        return EmbedConfig.from_mapping(asdict(self))

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(asdict(self).items()))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        return build_config(changes, base=self)


_TYPES = {f.name: type(f.default) for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _TYPES[key]
    try:
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ.__name__}") from None


def build_config(values: dict, base: RunConfig | None = None) -> RunConfig:
    merged = asdict(base or RunConfig())
    for k, v in values.items():
        merged[k] = _coerce(k, v)
    return RunConfig(**merged)


def parse_assignments(lines) -> dict[str, str]:
    out = {}
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    return build_config(parse_assignments(text.splitlines()))
