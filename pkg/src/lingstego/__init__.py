"""Generative linguistic steganography with Huffman token embedding,
Edge-Flipping coded payloads and in-context prompting."""

from .codec import (FrequencyTable, SecretPayload, compress_text, decompress_text, ef_decode,
                    ef_encode, ef_multiround, frame_payload, unframe_payload)
from .huffman import HuffmanCodebook, build_codebook, code_of, match_prefix
from .metrics import bpw, corpus_jsd, jsd, perplexity
from .pipeline import extract_secret, hide_secret
from .provider import InContextNgram, NgramModel, PromptContext, build_prompt, select_context
from .stega import EmbedConfig, StegoEnvelope, extract, hide

__version__ = "0.1.0"
