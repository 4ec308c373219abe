"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI maps to an
exit status and prints in its JSON diagnostics.
"""


class StegoError(Exception):
    code = "stego-error"


# codec

class CodecError(StegoError):
    code = "codec-error"


class MalformedBitstream(CodecError):
    code = "malformed-bitstream"


class BadMagic(CodecError):
    code = "bad-magic"


class UnsupportedVersion(CodecError):
    code = "unsupported-version"


class TruncatedPayload(CodecError):
    code = "truncated-payload"


# huffman

class EmptyPool(StegoError):
    code = "empty-pool"


class UnknownToken(StegoError):
    code = "unknown-token"


# embedding engine

class CapacityExceeded(StegoError):
    code = "capacity-exceeded"

    def __init__(self, message, bits_consumed=0, tokens=0):
        super().__init__(message)
        self.bits_consumed = bits_consumed
        self.tokens = tokens


class TokenNotInPool(StegoError):
    code = "token-not-in-pool"

    def __init__(self, message, step=-1, token=-1):
        super().__init__(message)
        self.step = step
        self.token = token


class TruncatedStegotext(StegoError):
    code = "truncated-stegotext"


# providers

class ProviderError(StegoError):
    code = "provider-error"


class ProviderUnavailable(ProviderError):
    code = "provider-unavailable"


class VocabularyMismatch(ProviderError):
    code = "vocabulary-mismatch"


class InsufficientTopK(ProviderError):
    code = "insufficient-top-k"


class NondeterminismDetected(ProviderError):
    code = "nondeterminism-detected"


class CorpusTooSmall(ProviderError):
    code = "corpus-too-small"


# metrics

class MetricError(StegoError):
    code = "metric-error"


class EmptyInput(MetricError):
    code = "empty-input"


class ZeroProbabilityToken(MetricError):
    code = "zero-probability-token"

    def __init__(self, message, position=-1):
        super().__init__(message)
        self.position = position


class SupportMismatch(MetricError):
    code = "support-mismatch"
