import math
import random
import warnings

import numpy as np
import pytest

from lingstego.errors import CorpusTooSmall, VocabularyMismatch
from lingstego.provider import (
    EOS, InContextNgram, NgramModel, PromptContext, ScoreVector, SplitMix64, build_prompt,
    select_context, select_indices,
)


def test_bigram_prefers_seen_continuation():
    m = NgramModel(["a b a b"])
    a, b = m.index["a"], m.index["b"]
    dist = m.next_scores(None, [a]).probabilities()
    assert int(np.argmax(dist)) == b


def test_bigram_hand_probabilities():
    # "a b": V = 3 (</s>, a, b), k = 0.01; history BOS has one count (a)
    m = NgramModel(["a b"])
    assert m.vocab == [EOS, "a", "b"]
    p = np.exp(m.log_probs([]))
    assert abs(p[1] - 1.01 / 1.03) < 1e-15
    assert abs(p[0] - 0.01 / 1.03) < 1e-15
    p = np.exp(m.log_probs([1]))
    assert abs(p[2] - 1.01 / 1.03) < 1e-15


def test_unseen_history_is_uniform():
    m = NgramModel(["a b", "c"])
    p = np.exp(m.log_probs([m.index["c"], m.index["b"]]))  # history "b" has been seen
    assert abs(p[0] - (1.01 / 1.04)) < 1e-15
    m2 = NgramModel(["a b"], vocab=["a", "b", "z"])
    p = np.exp(m2.log_probs([m2.index["z"]]))
    assert np.allclose(p, 1 / 4, rtol=0, atol=1e-15)


def test_rows_sum_to_one(sentences, base_model, provider, context):
    rng = random.Random(0)
    V = base_model.vocab_size
    prefixes = [[]] + [[rng.randrange(V) for _ in range(rng.randint(1, 6))] for _ in range(50)]
    for prefix in prefixes:
        assert abs(math.fsum(np.exp(base_model.log_probs(prefix))) - 1) < 1e-12
        assert abs(math.fsum(provider.next_scores(context, prefix).probabilities()) - 1) < 1e-12


def test_provider_is_deterministic(sentences, provider, context):
    fresh = InContextNgram(NgramModel(sentences))
    for prefix in ([], [1], [5, 9]):
        assert provider.next_scores(context, prefix) == fresh.next_scores(context, prefix)


def test_in_context_without_prompt_is_base(base_model, provider):
    assert provider.next_scores(None, [3]) == base_model.next_scores(None, [3])


def test_in_context_boosts_context_words(base_model, provider):
    ctx = PromptContext("imdb", ("the plot was dull.",))
    plot = base_model.index["plot"]
    with_ctx = provider.next_scores(ctx, []).probabilities()[plot]
    without = provider.next_scores(None, []).probabilities()[plot]
    assert with_ctx > without


def test_tokenize_roundtrip_and_mismatch(base_model):
    ids = base_model.tokenize("The movie")
    assert base_model.detokenize(ids + [base_model.eos_id]) == "the movie"
    with pytest.raises(VocabularyMismatch):
        base_model.tokenize("xyzzy-not-a-word")
    with pytest.raises(VocabularyMismatch):
        base_model.log_probs([base_model.vocab_size + 5])


def test_score_vector_sparse_sorts_and_rejects_duplicates():
    v = ScoreVector.sparse([5, 2], [1.0, 2.0])
    assert v.ids.tolist() == [2, 5] and v.values.tolist() == [2.0, 1.0]
    with pytest.raises(ValueError):
        ScoreVector.sparse([1, 1], [0.0, 0.0])


# --- context selection ---------------------------------------------------

def test_splitmix64_reference_vector():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


def test_select_indices_is_partial_permutation():
    for seed in range(50):
        idx = select_indices(10, seed, 10)
        assert sorted(idx) == list(range(10))


def test_select_context_same_seed_same_result(sentences):
    assert select_context(sentences, 7, 2, "imdb") == select_context(sentences, 7, 2, "imdb")


def test_select_context_seeds_differ():
    corpus = [f"sentence {i}." for i in range(1000)]
    same = sum(
        select_context(corpus, 2 * i, 2).sentences == select_context(corpus, 2 * i + 1, 2).sentences
        for i in range(100)
    )
    assert same == 0


def test_select_context_errors():
    with pytest.raises(CorpusTooSmall):
        select_context(["only one."], 0, 2)
    with pytest.raises(ValueError):
        select_context(["a.", "b."], 0, 0)
    with pytest.raises(ValueError):
        select_context(["a.", "b."], -1, 1)


# --- prompt --------------------------------------------------------------

def test_build_prompt_layout():
    ctx = PromptContext("IMDB", ("First one.", "Second one."))
    prompt = build_prompt(ctx)
    assert prompt.count("First one.") == 1 and prompt.count("Second one.") == 1
    assert prompt.index("First one.") < prompt.index("Second one.")
    assert "<CONTEXT>\nFirst one.\n\nSecond one.\n</CONTEXT>[/INST]" in prompt
    assert prompt.count("<CORPUS>IMDB</CORPUS>") == 2
    assert prompt.startswith("<<SYS>>\n")
    assert prompt.endswith("The generated similar sentence in ONE LINE is:")
    assert build_prompt(ctx) == ctx.prompt


def test_build_prompt_warns_on_empty_corpus_name():
    with pytest.warns(UserWarning):
        build_prompt(PromptContext("", ("x.",)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_prompt(PromptContext("imdb", ("x.",)))
