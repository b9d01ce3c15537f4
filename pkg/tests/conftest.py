"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately re-derive results through routes the
library does not use: exhaustive DFS path enumeration, a pure-Python
feature-hash reference, direct per-arc rescoring. Expected values in
tests come from these, not from the code under test.
"""

from __future__ import annotations

import zlib

import numpy as np
import pytest

from otflm.huffman import build_huffman
from otflm.lattice import Lattice, generate_lattice
from otflm.ngram import NgramModel, ngram_logprob, train_ngram
from otflm.rnnlm import RnnlmModel, advance_context, word_logprob
from otflm.synth import zipfian_corpus
from otflm.vocab import Vocabulary, build_vocabulary

MASK64 = (1 << 64) - 1
HASH_MULT = 0x9E3779B97F4A7C15


def reference_feature_index(seed, order_k, words, node_id, mask):
    """Pure-Python reimplementation of the normative feature hash."""

    def mix(h, x):
        h = ((h ^ x) * HASH_MULT) & MASK64
        return h ^ (h >> 32)

    h = mix(int(seed), int(order_k))
    for w in words:
        h = mix(h, int(w))
    h = mix(h, int(node_id))
    return h & int(mask)


def enumerate_paths(lattice: Lattice, limit: int = 200000) -> list[tuple[int, ...]]:
    """All complete arc-id paths via DFS."""
    out: list[tuple[int, ...]] = []

    def dfs(node, arcs):
        if len(out) > limit:
            raise AssertionError("path explosion in test lattice")
        if node in lattice.finals:
            out.append(tuple(arcs))
        for arc in lattice.out_arcs[node]:
            dfs(arc.dst, arcs + [arc.id])

    dfs(lattice.start, [])
    return out


def oracle_small_context(history, small_lm: NgramModel) -> list[int]:
    need = small_lm.order - 1
    hist = list(history)
    if len(hist) < need:
        hist = [small_lm.bos_id] * (need - len(hist)) + hist
    return hist


def oracle_path_score(lattice: Lattice, arc_ids, model: RnnlmModel, tree,
                      small_lm: NgramModel, lm_weight: float = 1.0) -> float:
    """Independent per-arc rescoring of one path: direct model calls, no
    cache/table/beam, same 4-byte delta rounding as the wire format."""
    ctx = model.zero_context()
    score = 0.0
    for arc_id in arc_ids:
        arc = lattice.arcs[arc_id]
        p = word_logprob(model, tree, ctx, arc.word)
        p_small = ngram_logprob(small_lm, oracle_small_context(ctx.history, small_lm), arc.word)
        delta = float(np.float32(p - p_small))
        score = score + arc.acoustic + lm_weight * (arc.smalllm + delta)
        ctx = advance_context(model, ctx, arc.word)
    return score


def oracle_first_pass_score(lattice: Lattice, arc_ids, lm_weight: float = 1.0) -> float:
    return sum(lattice.arcs[a].acoustic + lm_weight * lattice.arcs[a].smalllm
               for a in arc_ids)


@pytest.fixture(scope="session")
def small_setup():
    """A small trained stack shared by decoder/cache/acceptance tests."""
    from otflm import rnnlm as rnnlm_mod

    lines = zipfian_corpus(400, 60, seed=91)
    vocab = build_vocabulary(lines)
    tree = build_huffman(vocab)
    bigram = train_ngram(lines, vocab, 2, smoothing="kneser-ney")
    model = RnnlmModel.new(vocab.size, hidden_size=16, maxent_order=3,
                           maxent_table_bits=12, seed=17)
    rnnlm_mod.train(model, lines[:150], vocab, tree, epochs=1, learn_rate=0.1)
    return {"lines": lines, "vocab": vocab, "tree": tree,
            "bigram": bigram, "model": model}


def make_lattice(setup, line_index: int = 0, breadth: int = 3,
                 seed: int | None = None) -> Lattice:
    line = setup["lines"][line_index]
    noise = zlib.crc32(line.encode()) if seed is None else seed
    return generate_lattice(setup["vocab"].tokenize(line), setup["vocab"],
                            setup["bigram"], breadth, noise)
