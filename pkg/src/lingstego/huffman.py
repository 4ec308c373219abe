"""Per-step Huffman codebooks over a pruned candidate pool.

Sender and receiver must build bit-identical trees, so every tie is broken
deterministically:

* merging: equal weights pop in insertion order (pool order for leaves, then
  creation order for internal nodes);
* labeling: the heavier child takes the 0 branch; on equal weight the child
  holding the smaller token id goes left.

The second rule gives the "left is more probable" ordering that makes
zero-heavy bitstreams pick likelier tokens.

Trees are stored flat: nodes ``0..n-1`` are leaves in pool order, internal
nodes follow in creation order, and the root is the last node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyPool, UnknownToken

# (token_id, probability), sorted by descending probability then ascending id
CandidatePool = Sequence[tuple[int, float]]


@dataclass(eq=False)
class HuffmanCodebook:
    tokens: list[int]                 # leaf index -> token id
    weights: list[float]              # node -> subtree probability
    min_tokens: list[int]             # node -> smallest token id in subtree
    children: list[tuple[int, int]]   # internal node (index - n) -> (zero child, one child)
    codes: dict[int, tuple[int, ...]]

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def root(self) -> int:
        return len(self.weights) - 1

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.codes

    def is_leaf(self, node: int) -> bool:
        return node < len(self.tokens)

    def child(self, node: int, bit: int) -> int:
        return self.children[node - len(self.tokens)][bit]

    def probability(self, token: int) -> float:
        return self.weights[self.tokens.index(token)]

    def expected_length(self) -> float:
        return sum(self.weights[i] * len(self.codes[t]) for i, t in enumerate(self.tokens))


def build_codebook(pool: CandidatePool) -> HuffmanCodebook:
    n = len(pool)
    if n == 0:
        raise EmptyPool("cannot build a codebook from an empty pool")
    tokens = [t for t, _ in pool]
    total = sum(p for _, p in pool)
    if total <= 0:
        raise ValueError("pool probabilities must be positive")
    weights = [p / total for _, p in pool]
    min_tokens = list(tokens)
    children: list[tuple[int, int]] = []
    if n == 1:
        return HuffmanCodebook(tokens, weights, min_tokens, children, {tokens[0]: ()})

    # Two-queue Huffman: leaves by (weight, pool position), internal nodes are
    # created with non-decreasing weight. Equivalent to a heap keyed on
    # (weight, insertion order) since every leaf was inserted before any merge.
    leaves = sorted(range(n), key=lambda i: (weights[i], i))
    li = 0
    qi = n

    def pop():
        nonlocal li, qi
        if li < n and (qi >= len(weights) or weights[leaves[li]] <= weights[qi]):
            li += 1
            return leaves[li - 1]
        qi += 1
        return qi - 1

    for _ in range(n - 1):
        a = pop()
        b = pop()
        wa, wb = weights[a], weights[b]
        ma, mb = min_tokens[a], min_tokens[b]
        # a popped first, so wa <= wb
        if wa == wb and ma < mb:
            children.append((a, b))
            min_tokens.append(ma)
        else:
            children.append((b, a))
            min_tokens.append(ma if ma < mb else mb)
        weights.append(wa + wb)

    node_codes: list[tuple[int, ...]] = [()] * len(weights)
    for j in range(len(children) - 1, -1, -1):
        prefix = node_codes[n + j]
        zero, one = children[j]
        node_codes[zero] = prefix + (0,)
        node_codes[one] = prefix + (1,)
    codes = {tokens[i]: node_codes[i] for i in range(n)}
    return HuffmanCodebook(tokens, weights, min_tokens, children, codes)


def match_prefix(book: HuffmanCodebook, bits: Sequence[int], start: int = 0) -> tuple[int, int]:
    """Walk the tree with ``bits[start:]``.

    Returns ``(token, consumed)``. If input runs out before a leaf, the walk
    continues down 0 branches; those padding bits are not counted.
    """
    n = len(book.tokens)
    children = book.children
    node = len(book.weights) - 1
    i = start
    end = len(bits)
    while node >= n:
        if i < end:
            node = children[node - n][bits[i]]
            i += 1
        else:
            node = children[node - n][0]
    return book.tokens[node], i - start


def code_of(book: HuffmanCodebook, token: int) -> tuple[int, ...]:
    try:
        return book.codes[token]
    except KeyError:
        raise UnknownToken(f"token {token} is not in the codebook") from None
