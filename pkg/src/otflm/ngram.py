"""Backoff n-gram language model with interpolated discount smoothing.

Serves three roles in the stack: the short-span LM whose scores ride on
lattice arcs, the comparison baseline for two-pass rescoring, and the
score the on-the-fly substitution subtracts.

Smoothing: ``kneser-ney`` uses continuation counts below the top order
and a per-order discount estimated from counts-of-counts
(``n1 / (n1 + 2 n2)``); ``absolute-discount`` keeps raw counts
everywhere with a fixed discount (0 gives plain MLE with no backoff
mass, useful as a degenerate mode). Both build interpolated
distributions, stored ARPA-style: seen n-grams carry the interpolated
probability, contexts carry the leftover-mass backoff weight, unseen
n-grams evaluate as bow(context) + P(word | shorter context). Log base
e internally; log10 only in ARPA files. Trained log values are
canonicalized to survive the log10 round trip bit-exactly.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from otflm.vocab import Vocabulary, read_sentences

_LN10 = math.log(10.0)
_NEG_INF = float("-inf")
_ARPA_NEG_INF = -99.0


@dataclass
class NgramModel:
    """Probabilities keyed by full n-gram tuple, backoff weights by context."""

    order: int
    vocab_size: int
    bos_id: int
    eos_id: int
    probs: dict[tuple[int, ...], float] = field(default_factory=dict)
    backoffs: dict[tuple[int, ...], float] = field(default_factory=dict)

    def logprob(self, context: Sequence[int], w: int) -> float:
        return ngram_logprob(self, context, w)


def _canonical_ln(x: float) -> float:
    """Nudge a natural-log value onto a fixed point of the log10 round
    trip so ARPA write->read reproduces it bit-exactly."""
    if x == _NEG_INF or x == 0.0:
        return x
    for _ in range(5):
        y = (x / _LN10) * _LN10
        if y == x:
            return x
        x = y
    return x


def _padded(sentence: Sequence[int], order: int, bos: int, eos: int) -> list[int]:
    return [bos] * (order - 1) + list(sentence) + [eos]


def train_ngram(corpus, vocab: Vocabulary, order: int,
                smoothing: str = "kneser-ney",
                discount: float | None = None) -> NgramModel:
    """Count, discount and interpolate; see the module docstring.

    ``corpus`` is a line stream/path or pre-tokenized id sentences.
    """
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in 1..5, got {order}")
    if smoothing not in ("kneser-ney", "absolute-discount"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if discount is not None and not 0.0 <= discount < 1.0:
        raise ValueError(f"discount must be in [0, 1), got {discount}")

    if isinstance(corpus, list) and corpus and isinstance(corpus[0], (list, tuple)):
        sentences = [list(s) for s in corpus]
    else:
        sentences = read_sentences(corpus, vocab)
    if not sentences:
        raise ValueError("training corpus is empty")

    V = vocab.size
    bos, eos = vocab.sentence_begin_id, vocab.sentence_end_id
    raw: list[Counter] = [Counter() for _ in range(order + 1)]
    for sent in sentences:
        seq = _padded(sent, order, bos, eos)
        for i in range(order - 1, len(seq)):
            for k in range(1, order + 1):
                raw[k][tuple(seq[i - k + 1:i + 1])] += 1

    # effective counts per level: raw at the top, continuation (distinct
    # left extensions) below for kneser-ney
    eff: list[dict] = [dict() for _ in range(order + 1)]
    eff[order] = dict(raw[order])
    for k in range(order - 1, 0, -1):
        if smoothing == "kneser-ney":
            cont: Counter = Counter()
            for gram in raw[k + 1]:
                cont[gram[1:]] += 1
            eff[k] = dict(cont)
        else:
            eff[k] = dict(raw[k])

    def estimate_discount(level_counts: dict) -> float:
        if discount is not None:
            return discount
        n1 = sum(1 for c in level_counts.values() if c == 1)
        n2 = sum(1 for c in level_counts.values() if c == 2)
        if n1 + 2 * n2 == 0:
            return 0.5
        return n1 / (n1 + 2 * n2)

    model = NgramModel(order=order, vocab_size=V, bos_id=bos, eos_id=eos)
    # level 1: interpolate with the uniform distribution so every word
    # is covered
    d1 = estimate_discount(eff[1]) if smoothing == "kneser-ney" else (
        discount if discount is not None else 0.5)
    total1 = sum(eff[1].values())
    seen1 = len(eff[1])
    lam1 = d1 * seen1 / total1
    unigram = [0.0] * V
    for w in range(V):
        c = eff[1].get((w,), 0)
        unigram[w] = max(c - d1, 0.0) / total1 + lam1 / V
        model.probs[(w,)] = _canonical_ln(
            math.log(unigram[w]) if unigram[w] > 0 else _NEG_INF)

    prev_linear: dict[tuple[int, ...], float] = {(w,): unigram[w] for w in range(V)}
    for k in range(2, order + 1):
        dk = estimate_discount(eff[k]) if smoothing == "kneser-ney" else d1
        by_ctx: dict[tuple[int, ...], list] = defaultdict(list)
        for gram, c in eff[k].items():
            by_ctx[gram[:-1]].append((gram[-1], c))
        level_linear: dict[tuple[int, ...], float] = {}
        for ctx, items in by_ctx.items():
            total = sum(c for _, c in items)
            gamma = dk * len(items) / total
            for w, c in items:
                lower = prev_linear.get(ctx[1:] + (w,))
                if lower is None:
                    lower = _lower_prob(model, ctx[1:], w)
                p = max(c - dk, 0.0) / total + gamma * lower
                level_linear[ctx + (w,)] = p
                model.probs[ctx + (w,)] = _canonical_ln(
                    math.log(p) if p > 0 else _NEG_INF)
            model.backoffs[ctx] = _canonical_ln(
                math.log(gamma) if gamma > 0 else _NEG_INF)
        prev_linear = level_linear
    return model


def _lower_prob(model: NgramModel, context: tuple[int, ...], w: int) -> float:
    return math.exp(ngram_logprob(model, context, w))


def ngram_logprob(model: NgramModel, context: Sequence[int], w: int) -> float:
    """ln P(w | context): longest stored match, else bow(context) +
    P(w | shorter context), evaluated bottom-up."""
    w = int(w)
    if not 0 <= w < model.vocab_size:
        raise ValueError(f"word id {w} out of range 0..{model.vocab_size - 1}")
    ctx = tuple(int(x) for x in context)
    if model.order > 1:
        ctx = ctx[-(model.order - 1):]
    else:
        ctx = ()
    suffixes = [ctx[i:] for i in range(len(ctx) + 1)]
    for depth, c in enumerate(suffixes):
        lp = model.probs.get(c + (w,))
        if lp is not None:
            for shorter in reversed(suffixes[:depth]):
                lp = model.backoffs.get(shorter, 0.0) + lp
            return lp
    raise KeyError(f"word {w} missing from unigram table")


def context_prob_sum(model: NgramModel, context: Sequence[int]) -> float:
    """Full-vocabulary probability mass for a context (normalization check)."""
    return sum(math.exp(ngram_logprob(model, context, w))
               for w in range(model.vocab_size))


def perplexity(model: NgramModel, sentences: Iterable[Sequence[int]]) -> float:
    """exp of mean negative log-probability; sentence-end counted, the
    context is padded with sentence-begin tokens."""
    total = 0.0
    count = 0
    for sent in sentences:
        ctx = [model.bos_id] * max(model.order - 1, 0)
        for w in list(sent) + [model.eos_id]:
            total -= ngram_logprob(model, ctx, w)
            ctx.append(int(w))
            count += 1
    if count == 0:
        raise ValueError("no tokens to evaluate")
    return math.exp(total / count)


# -- ARPA text format -----------------------------------------------------

def _fmt(x: float) -> str:
    if x == _NEG_INF:
        return "-99"
    return repr(x / _LN10)


def save_arpa(model: NgramModel, vocab: Vocabulary, path: str | Path) -> None:
    """Standard ARPA export (log10 columns, -99 for minus infinity).

    Backoff contexts that never occur as n-gram entries themselves
    (sentence-begin contexts, typically) are emitted as conventional
    placeholder lines: probability -99 with the backoff weight attached.
    """
    entries: list[set] = [set() for _ in range(model.order + 1)]
    for gram in model.probs:
        entries[len(gram)].add(gram)
    for ctx in model.backoffs:
        entries[len(ctx)].add(ctx)
    levels = [sorted(entries[k]) for k in range(model.order + 1)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(levels[k])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in levels[k]:
                words = " ".join(vocab.words[w] for w in gram)
                line = f"{_fmt(model.probs.get(gram, _NEG_INF))}\t{words}"
                if k < model.order:
                    bow = model.backoffs.get(gram)
                    if bow is not None:
                        line += f"\t{_fmt(bow)}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def load_arpa(path: str | Path, vocab: Vocabulary) -> NgramModel:
    """Parse an ARPA file back into a model (words mapped through *vocab*)."""

    def from_log10(text: str) -> float:
        v = float(text)
        if v <= _ARPA_NEG_INF + 0.001:
            return _NEG_INF
        return v * _LN10

    order = 0
    counts: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    i = 0
    while i < len(lines) and lines[i].strip() != "\\data\\":
        i += 1
    if i == len(lines):
        raise ValueError(f"{path}: missing \\data\\ section")
    i += 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line.startswith("ngram "):
            k, n = line[len("ngram "):].split("=")
            counts[int(k)] = int(n)
            order = max(order, int(k))
            i += 1
            continue
        break
    if order == 0:
        raise ValueError(f"{path}: no ngram counts in header")
    model = NgramModel(order=order, vocab_size=vocab.size,
                       bos_id=vocab.sentence_begin_id,
                       eos_id=vocab.sentence_end_id)
    k = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "\\end\\":
            break
        if line.endswith("-grams:") and line.startswith("\\"):
            k = int(line[1:].split("-")[0])
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if k == 0 or len(parts) < 2:
            raise ValueError(f"{path}: stray line outside n-gram section: {line!r}")
        lp = from_log10(parts[0])
        words = parts[1].split() if "\t" in line else parts[1:1 + k]
        if len(words) != k:
            raise ValueError(f"{path}: expected {k} words in {line!r}")
        gram = tuple(vocab.ids[w] for w in words)
        rest = parts[2:] if "\t" in line else parts[1 + k:]
        bow = from_log10(rest[0]) if rest else None
        # a -99 probability next to a finite backoff weight is the
        # conventional context-only placeholder, not a real probability
        placeholder = lp == _NEG_INF and bow is not None and bow != _NEG_INF
        if not placeholder:
            model.probs[gram] = lp
        if bow is not None:
            model.backoffs[gram] = bow
    return model
