"""Synthetic corpora for tests and the benchmark harness.

Two generators: a plain Zipfian corpus for training desk-scale models,
and a repeated-commands corpus (a fixed set of command templates reused
with Zipfian frequency across utterances) that drives the cache
studies. Both are deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np


def _zipf_probs(n: int, s: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    p = 1.0 / ranks**s
    return p / p.sum()


def zipfian_corpus(n_sentences: int, vocab_size: int, seed: int,
                   zipf_s: float = 1.05, min_len: int = 3,
                   max_len: int = 10) -> list[str]:
    """Sentences of words ``w0..w{vocab_size-1}`` drawn with Zipfian
    frequencies; lengths uniform in [min_len, max_len]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    probs = _zipf_probs(vocab_size, zipf_s)
    lines = []
    for _ in range(n_sentences):
        length = int(rng.integers(min_len, max_len + 1))
        ids = rng.choice(vocab_size, size=length, p=probs)
        lines.append(" ".join(f"w{int(i)}" for i in ids))
    return lines


def command_corpus(n_templates: int = 50, n_utterances: int = 500,
                   seed: int = 0, vocab_size: int = 120, zipf_s: float = 1.0,
                   min_len: int = 2, max_len: int = 6):
    """Repeated-commands traffic: *n_templates* fixed word sequences,
    sampled *n_utterances* times with Zipfian reuse over template rank.

    Returns (templates, utterances) where utterances is a list of
    (template_id, line) pairs; identical template ids carry identical
    lines, so repeated commands repeat exactly.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    word_probs = _zipf_probs(vocab_size, 1.05)
    templates = []
    for _ in range(n_templates):
        length = int(rng.integers(min_len, max_len + 1))
        ids = rng.choice(vocab_size, size=length, p=word_probs)
        templates.append(" ".join(f"w{int(i)}" for i in ids))
    reuse = _zipf_probs(n_templates, zipf_s)
    picks = rng.choice(n_templates, size=n_utterances, p=reuse)
    utterances = [(int(t), templates[int(t)]) for t in picks]
    return templates, utterances
