"""Command-line interface: ``prepare``, ``hide``, ``extract``, ``eval``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import errors
from .codec import FrequencyTable
from .config import ConfigError, RunConfig, build_config, load_config, parse_assignments
from .corpus import corpus_digest, dump_corpus, load_corpus, split_sentences
from .metrics import bpw, corpus_jsd, perplexity
from .pipeline import EnvelopeError, extract_secret, hide_secret
from .provider import InContextNgram, NgramModel, words
from .remote import RemoteProvider
from .stega import StegoEnvelope

log = logging.getLogger("lingstego")

EXIT_CODES = {
    "internal-error": 1,
    "usage-error": 2,
    "io-error": 3,
    "empty-corpus": 4,
    "corpus-too-small": 5,
    "config-error": 6,
    "malformed-bitstream": 10,
    "bad-magic": 11,
    "unsupported-version": 12,
    "truncated-payload": 13,
    "codec-error": 14,
    "capacity-exceeded": 20,
    "token-not-in-pool": 21,
    "truncated-stegotext": 22,
    "empty-pool": 23,
    "unknown-token": 24,
    "provider-unavailable": 30,
    "vocabulary-mismatch": 31,
    "insufficient-top-k": 32,
    "nondeterminism-detected": 33,
    "provider-error": 34,
    "empty-input": 40,
    "zero-probability-token": 41,
    "support-mismatch": 42,
    "metric-error": 43,
}

EPILOG = "exit codes:\n" + "\n".join(f"  {v:3d}  {k}" for k, v in sorted(EXIT_CODES.items(), key=lambda kv: kv[1]))


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# corpus artifacts


class PreparedCorpus:
    def __init__(self, sentences, table, corpus_id, digest):
        self.sentences = sentences
        self.table = table
        self.corpus_id = corpus_id
        self.digest = digest

    @classmethod
    def load(cls, path) -> "PreparedCorpus":
        path = Path(path)
        try:
            if path.is_dir():
                sentences = load_corpus(path / "corpus.txt")
                table = FrequencyTable.load(path / "freq.tsv")
                meta = StegoEnvelope.parse_sidecar((path / "corpus.meta").read_text(encoding="utf-8"))
                corpus_id = meta.get("corpus_id", path.name)
            else:
                sentences = load_corpus(path)
                table = FrequencyTable.from_text(dump_corpus(sentences))
                corpus_id = path.stem
        except OSError as e:
            raise CliError("io-error", f"cannot read corpus {path}: {e}") from None
        if not sentences:
            raise CliError("empty-corpus", f"corpus {path} has no sentences")
        return cls(sentences, table, corpus_id, corpus_digest(sentences))


def make_provider(cfg: RunConfig, corpus: PreparedCorpus):
    if cfg.provider == "remote":
        provider = RemoteProvider.from_env(top_k=cfg.max_candidates)
        provider.probe()
        return provider
    base = NgramModel(corpus.sentences, n=cfg.ngram_order, k=cfg.smoothing)
    return InContextNgram(base, weight=cfg.context_weight)


# ---------------------------------------------------------------------------
# envelope files


def write_envelopes(envelopes, out_dir) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in list(out.glob("envelope-*.txt")) + list(out.glob("envelope-*.meta")):
        stale.unlink()
    paths = []
    for env in envelopes:
        stem = out / f"envelope-{env.sequence:03d}"
        stem.with_suffix(".txt").write_text(env.text + "\n", encoding="utf-8")
        stem.with_suffix(".meta").write_text(env.sidecar(), encoding="utf-8")
        paths.append(str(stem.with_suffix(".txt")))
    return paths


def _expand(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("envelope-*.txt")))
        else:
            out.append(p)
    return out


def read_envelopes(paths, provider) -> list[StegoEnvelope]:
    envs = []
    for i, p in enumerate(_expand(paths)):
        try:
            text = p.read_text(encoding="utf-8").rstrip("\n")
            meta_path = p.with_suffix(".meta")
            meta = StegoEnvelope.parse_sidecar(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        except OSError as e:
            raise CliError("io-error", f"cannot read envelope {p}: {e}") from None
        envs.append(StegoEnvelope(
            tokens=tuple(provider.tokenize(text)),
            text=text,
            bits_consumed=int(meta.get("bits_consumed", 0)),
            seed=int(meta.get("seed", 0)),
            config_digest=meta.get("config_digest", ""),
            corpus_id=meta.get("corpus_id", ""),
            sequence=int(meta.get("sequence", i)),
        ))
    if not envs:
        raise CliError("io-error", "no envelope files found")
    return sorted(envs, key=lambda e: e.sequence)


# ---------------------------------------------------------------------------
# commands


def emit(data: dict, fmt: str) -> None:
    if fmt == "tsv":
        keys = list(data)
        print("\t".join(keys))
        print("\t".join(str(data[k]) for k in keys))
    else:
        print(json.dumps(data, sort_keys=True))


def cmd_prepare(args, cfg: RunConfig) -> int:
    src = Path(args.input)
    try:
        raw = src.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise CliError("io-error", f"cannot read {src}: {e}") from None
    sentences = split_sentences(raw)
    if not sentences:
        raise CliError("empty-corpus", f"{src} contains no sentences")
    text = dump_corpus(sentences)
    table = FrequencyTable.from_text(text)
    digest = corpus_digest(sentences)
    name = args.name or src.stem
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.txt").write_text(text, encoding="utf-8")
    table.save(out / "freq.tsv")
    (out / "corpus.meta").write_text(
        f"corpus_id={name}\ndigest={digest}\nsentences={len(sentences)}\n", encoding="utf-8")
    emit({"corpus_id": name, "digest": digest, "sentences": len(sentences), "out": str(out)}, args.format)
    return 0


def cmd_hide(args, cfg: RunConfig) -> int:
    corpus = PreparedCorpus.load(cfg.corpus)
    if args.secret is not None:
        secret = args.secret
    elif args.secret_file:
        try:
            secret = Path(args.secret_file).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise CliError("io-error", f"cannot read secret: {e}") from None
    else:
        secret = sys.stdin.read()
    provider = make_provider(cfg, corpus)
    envelopes = hide_secret(secret, provider, cfg.embed_config(), corpus.sentences,
                            corpus_id=corpus.corpus_id, table=corpus.table,
                            codec_id=cfg.codec_id, max_rounds=cfg.ef_rounds)
    paths = write_envelopes(envelopes, args.out or cfg.out)
    emit({"envelopes": len(envelopes), "bits": sum(e.bits_consumed for e in envelopes),
          "paths": ",".join(paths)}, args.format)
    return 0


def cmd_extract(args, cfg: RunConfig) -> int:
    corpus = PreparedCorpus.load(cfg.corpus)
    provider = make_provider(cfg, corpus)
    envelopes = read_envelopes(args.envelopes, provider)
    secret = extract_secret(envelopes, provider, cfg.embed_config(), corpus.sentences,
                            corpus_id=corpus.corpus_id, table=corpus.table)
    if args.output:
        Path(args.output).write_text(secret, encoding="utf-8")
    else:
        sys.stdout.write(secret)
        sys.stdout.flush()
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    corpus = PreparedCorpus.load(cfg.corpus)
    provider = make_provider(cfg, corpus)
    envelopes = read_envelopes(args.envelopes, provider)
    report = bpw(envelopes).to_dict()
    report["envelopes"] = len(envelopes)
    if args.ppl:
        scorer = provider.base if isinstance(provider, InContextNgram) else provider
        values = [perplexity(e.tokens, scorer) for e in envelopes if e.tokens]
        report["ppl"] = sum(values) / len(values) if values else float("nan")
    if args.jsd_corpus:
        other = PreparedCorpus.load(args.jsd_corpus)
        vocab = {w for s in corpus.sentences + other.sentences for w in words(s)}
        model_a = NgramModel(corpus.sentences, n=cfg.ngram_order, k=cfg.smoothing, vocab=vocab)
        model_b = NgramModel(other.sentences, n=cfg.ngram_order, k=cfg.smoothing, vocab=vocab)
        samples = [model_a.tokenize(e.text) for e in envelopes]
        jr = corpus_jsd(model_a, model_b, samples, workers=args.workers)
        report["jsd"] = jr.jsd
        report["jsd_positions"] = jr.positions
    emit(report, args.format)
    return 0


# ---------------------------------------------------------------------------
# argument handling


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="key=value config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    g.add_argument("--corpus", help="prepared corpus directory or one-sentence-per-line file")
    g.add_argument("--provider", choices=["toy", "remote"])
    g.add_argument("--seed", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--t0", type=float)
    g.add_argument("--delta0", type=float)
    g.add_argument("--k", type=int, dest="context_size", help="number of context sentences")
    g.add_argument("--max-candidates", type=int, dest="max_candidates")
    g.add_argument("--max-tokens", type=int, dest="max_tokens")
    g.add_argument("--codec", choices=["raw", "huffman"], help="secret text codec")
    g.add_argument("--ef-rounds", type=int, dest="ef_rounds", help="maximum EF rounds (0 disables)")
    g.add_argument("--format", choices=["json", "tsv"], default="json")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="lingstego",
        description="Hide text in language-model generated sentences and get it back.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="split a raw corpus into sentences",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", help="corpus name (default: input file stem)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("hide", parents=[common], help="hide a secret",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--secret", help="secret text (default: read stdin)")
    src.add_argument("--secret-file")
    p.add_argument("--out", help="envelope output directory")
    p.set_defaults(func=cmd_hide)

    p = sub.add_parser("extract", parents=[common], help="recover a secret",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("envelopes", nargs="+", help="envelope .txt files or directories")
    p.add_argument("--output", help="write the secret here instead of stdout")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", parents=[common], help="embedding-rate and quality metrics",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("envelopes", nargs="+")
    p.add_argument("--ppl", action="store_true", help="perplexity under the base model")
    p.add_argument("--jsd-corpus", help="second corpus; report JSD between the two n-gram models")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = parse_assignments(args.set)
    for key in ("corpus", "provider", "seed", "tau", "alpha", "beta", "t0", "delta0",
                "context_size", "max_candidates", "max_tokens", "ef_rounds"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "codec", None):
        overrides["codec_id"] = 0 if args.codec == "raw" else 1
    cfg = build_config(overrides, base=cfg)
    if args.command != "prepare" and not cfg.corpus:
        raise ConfigError("no corpus given (use --corpus or corpus= in the config)")
    return cfg


def _fail(code: str, message: str, **extra) -> int:
    payload = {"error": code, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return EXIT_CODES.get(code, 1)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except ConfigError as e:
        return _fail("config-error", str(e))
    except CliError as e:
        return _fail(e.code, str(e))
    except EnvelopeError as e:
        return _fail(e.code, str(e.cause), envelope=e.index)
    except errors.StegoError as e:
        return _fail(e.code, str(e))
    except OSError as e:
        return _fail("io-error", str(e))


if __name__ == "__main__":
    sys.exit(main())
