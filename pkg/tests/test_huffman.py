import functools
import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lingstego.errors import EmptyPool, UnknownToken
from lingstego.huffman import build_codebook, code_of, match_prefix


def make_pool(weights, ids=None):
    """Sorted candidate pool from raw weights (desc prob, asc id)."""
    ids = list(ids) if ids is not None else list(range(len(weights)))
    total = sum(weights)
    pool = [(t, w / total) for t, w in zip(ids, weights)]
    return sorted(pool, key=lambda e: (-e[1], e[0]))


@functools.lru_cache(maxsize=None)
def feasible_length_vectors(n):
    """All non-decreasing length vectors of a binary prefix code on n symbols
    (Kraft sum <= 1). Lengths above n-1 are never needed for optimality."""
    if n == 1:
        return [(0,)]
    out = []
    for combo in itertools.combinations_with_replacement(range(1, n), n):
        if sum(Fraction(1, 2 ** l) for l in combo) <= 1:
            out.append(combo)
    return out


def brute_force_optimal(probs):
    ps = sorted((Fraction(p) for p in probs), reverse=True)
    return min(sum(p * l for p, l in zip(ps, lv)) for lv in feasible_length_vectors(len(ps)))


def exact_expected_length(book):
    return sum(Fraction(book.weights[i]) * len(book.codes[t]) for i, t in enumerate(book.tokens))


def walk_nodes(book):
    stack = [book.root]
    while stack:
        node = stack.pop()
        if not book.is_leaf(node):
            yield node
            stack.append(book.child(node, 0))
            stack.append(book.child(node, 1))


# --- examples ------------------------------------------------------------

def test_two_symbols():
    book = build_codebook([(1, 0.7), (2, 0.3)])
    assert book.codes == {1: (0,), 2: (1,)}


def test_singleton_has_empty_code():
    book = build_codebook([(5, 1.0)])
    assert code_of(book, 5) == ()
    assert match_prefix(book, [1, 0, 1]) == (5, 0)


def test_empty_pool():
    with pytest.raises(EmptyPool):
        build_codebook([])


def test_unknown_token():
    with pytest.raises(UnknownToken):
        code_of(build_codebook([(1, 0.5), (2, 0.5)]), 3)


def test_match_prefix_two_symbols():
    book = build_codebook([(1, 0.7), (2, 0.3)])
    assert match_prefix(book, [0, 1, 1]) == (1, 1)
    assert match_prefix(book, [1]) == (2, 1)


def test_padding_follows_zero_branches():
    # probabilities 0.4, 0.3, 0.3: the two 0.3 leaves merge and go left
    book = build_codebook([(1, 0.4), (2, 0.3), (3, 0.3)])
    assert book.codes == {2: (0, 0), 3: (0, 1), 1: (1,)}
    assert match_prefix(book, []) == (2, 0)
    assert match_prefix(book, [0]) == (2, 1)
    assert match_prefix(book, [0, 1, 1], start=1) == (1, 1)


def test_equal_weights_tie_breaks_by_token_id():
    book = build_codebook(make_pool([1, 1, 1, 1], ids=[40, 10, 30, 20]))
    assert book.codes == {10: (0, 0), 20: (0, 1), 30: (1, 0), 40: (1, 1)}


def test_renormalises_pool():
    a = build_codebook([(1, 0.2), (2, 0.1), (3, 0.05)])
    b = build_codebook([(1, 0.4), (2, 0.2), (3, 0.1)])
    assert a.codes == b.codes
    assert abs(sum(a.weights[:3]) - 1.0) < 1e-12


# --- properties ----------------------------------------------------------

def test_optimal_on_small_pools():
    rng = random.Random(11)
    for trial in range(500):
        n = rng.randint(1, 8)
        if trial % 3 == 0:
            weights = [rng.randint(1, 4) for _ in range(n)]  # many exact ties
        else:
            weights = [rng.random() + 1e-3 for _ in range(n)]
        book = build_codebook(make_pool(weights))
        assert exact_expected_length(book) == brute_force_optimal(book.weights[:n])


pools = st.lists(st.floats(min_value=1e-4, max_value=1.0), min_size=1, max_size=64).map(make_pool)


@settings(max_examples=300, deadline=None)
@given(pools)
def test_prefix_free_and_kraft(pool):
    book = build_codebook(pool)
    codes = list(book.codes.values())
    assert set(book.codes) == {t for t, _ in pool}
    for a, b in itertools.permutations(codes, 2):
        assert a != b[:len(a)]
    if len(pool) >= 2:
        assert sum(Fraction(1, 2 ** len(c)) for c in codes) == 1


@settings(max_examples=300, deadline=None)
@given(pools)
def test_local_ordering(pool):
    book = build_codebook(pool)
    for node in walk_nodes(book):
        left, right = book.child(node, 0), book.child(node, 1)
        wl, wr = book.weights[left], book.weights[right]
        assert wl >= wr
        if wl == wr:
            assert book.min_tokens[left] < book.min_tokens[right]


@settings(max_examples=300, deadline=None)
@given(pools, st.lists(st.integers(0, 1), max_size=20), st.data())
def test_code_and_match_agree(pool, tail, data):
    book = build_codebook(pool)
    for tok in book.codes:
        code = list(code_of(book, tok))
        assert match_prefix(book, code + tail) == (tok, len(code))
    # any bit string resolves to the token whose code is its (padded) prefix
    bits = data.draw(st.lists(st.integers(0, 1), max_size=12))
    tok, used = match_prefix(book, bits)
    code = code_of(book, tok)
    assert used == min(len(code), len(bits))
    assert list(code[:used]) == bits[:used]
    assert all(b == 0 for b in code[used:])


def test_deterministic():
    rng = random.Random(3)
    for _ in range(50):
        pool = make_pool([rng.random() for _ in range(rng.randint(1, 64))])
        assert build_codebook(pool).codes == build_codebook(list(pool)).codes


def test_frozen_codebook():
    # hand trace: {4,2} -> A(.10); leaf 1 ties A and wins left (id 1 < 2) -> B(.20);
    # leaf 9 ties B, B holds id 1 so B goes left -> C(.40); {7,3} -> D(.60) left of root
    pool = make_pool([0.35, 0.25, 0.2, 0.1, 0.06, 0.04], ids=[7, 3, 9, 1, 4, 2])
    assert build_codebook(pool).codes == {
        7: (0, 0), 3: (0, 1), 1: (1, 0, 0), 4: (1, 0, 1, 0), 2: (1, 0, 1, 1), 9: (1, 1),
    }
