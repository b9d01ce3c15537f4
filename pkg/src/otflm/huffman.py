"""Frequency-ordered binary tree for the hierarchical softmax output layer.

Standard greedy merge on a min-heap. Tie-breaking is fixed so the tree
is reproducible: equal weights are ordered by (leaf word id | n +
creation order for merged nodes), i.e. the lowest word id / earliest
merge wins. Branch bit 0 is the first node popped at a merge, bit 1 the
second.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from otflm.vocab import Vocabulary


@dataclass
class HuffmanTree:
    """Binary tree over ``n_words`` leaves with ``n_words - 1`` internal nodes.

    ``children[j]`` holds the two child references of internal node j; a
    reference ``< n_words`` is a leaf (word id), otherwise it names
    internal node ``ref - n_words``. ``root`` is always the last merge,
    ``n_words - 2``. ``leaf_paths[w]`` is the root-to-leaf sequence of
    (internal node id, branch bit) pairs for word w.
    """

    n_words: int
    children: list[tuple[int, int]]
    leaf_paths: list[list[tuple[int, int]]]

    # flat layout for the numeric kernels, built once
    path_nodes: np.ndarray = field(init=False, repr=False)
    path_signs: np.ndarray = field(init=False, repr=False)
    path_offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes: list[int] = []
        signs: list[float] = []
        offsets = np.zeros(self.n_words + 1, dtype=np.int64)
        for w, path in enumerate(self.leaf_paths):
            for node, bit in path:
                nodes.append(node)
                signs.append(1.0 if bit == 0 else -1.0)
            offsets[w + 1] = len(nodes)
        self.path_nodes = np.asarray(nodes, dtype=np.int32)
        self.path_signs = np.asarray(signs, dtype=np.float32)
        self.path_offsets = offsets

    @property
    def n_internal(self) -> int:
        return self.n_words - 1

    @property
    def root(self) -> int:
        return self.n_words - 2

    def code_length(self, word_id: int) -> int:
        return len(self.leaf_paths[word_id])

    def weighted_length(self, counts) -> int:
        """Total encoded size: sum of count(w) * code_length(w)."""
        return sum(c * len(p) for c, p in zip(counts, self.leaf_paths))


def build_huffman(vocab: Vocabulary) -> HuffmanTree:
    """Build the minimum-weighted-length binary tree over vocab counts."""
    return build_huffman_from_counts(vocab.counts)


def build_huffman_from_counts(counts) -> HuffmanTree:
    n = len(counts)
    if n < 2:
        raise ValueError(f"need at least 2 words to build a tree, got {n}")

    # heap entries: (weight, tiebreak, ref); leaves ref=word id, merged
    # nodes ref = n + internal id so earlier merges sort first.
    heap: list[tuple[int, int, int]] = [(c, w, w) for w, c in enumerate(counts)]
    heapq.heapify(heap)
    children: list[tuple[int, int]] = []
    for j in range(n - 1):
        w0, _, left = heapq.heappop(heap)
        w1, _, right = heapq.heappop(heap)
        children.append((left, right))
        heapq.heappush(heap, (w0 + w1, n + j, n + j))

    # walk down from the root collecting (node, bit) prefixes
    leaf_paths: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    root = n + (n - 2)
    stack: list[tuple[int, list[tuple[int, int]]]] = [(root, [])]
    while stack:
        ref, prefix = stack.pop()
        if ref < n:
            leaf_paths[ref] = prefix
            continue
        node = ref - n
        left, right = children[node]
        stack.append((left, prefix + [(node, 0)]))
        stack.append((right, prefix + [(node, 1)]))

    return HuffmanTree(n_words=n, children=children, leaf_paths=leaf_paths)


def leaf_path(tree: HuffmanTree, word_id: int) -> list[tuple[int, int]]:
    """Root-to-leaf (internal node id, branch bit) pairs for word_id."""
    if not 0 <= word_id < tree.n_words:
        raise ValueError(f"word id {word_id} out of range 0..{tree.n_words - 1}")
    return list(tree.leaf_paths[word_id])
