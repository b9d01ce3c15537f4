"""Search-side simulator: on-the-fly substitution, n-best, two-pass modes.

The traversal walks lattice nodes frame-synchronously, keeps per-node
token lists keyed by recurrent-context index, and for every surviving
(token, arc) expansion exchanges one fixed-size request/response pair
with the rescore server. The server owns the model, the index table,
the cache and the small LM: it scores the word, computes the delta
against the small LM's estimate for the same transition (derived from
the stored context's word history), and returns the quantized delta
plus the packed successor index. The traversal then substitutes
``arc_lm + delta`` for the arc's LM portion, which telescopes to the
recurrent model's score when arc scores and history-based estimates
agree.

Tokens landing on the same node with the same successor context index
are merged keeping the better score; with a beam at least as wide as
the number of distinct contexts per node the search is exact under the
rescored objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappush, heappop
from typing import Sequence

from otflm.cache import RescoreCache, rnnlm_prob
from otflm.codec import (
    RescoreRequest,
    RescoreResponse,
    TransferLedger,
    pack,
    unpack,
)
from otflm.context_table import IndexTable
from otflm.huffman import HuffmanTree
from otflm.lattice import Lattice
from otflm.ngram import NgramModel, ngram_logprob
from otflm.rnnlm import (
    RnnlmContext,
    RnnlmModel,
    advance_context,
    word_logprob,
)
from otflm.codec import quantize_delta


@dataclass
class PathHypothesis:
    """One complete path: arc ids, words, and score breakdown."""

    arcs: tuple[int, ...]
    words: tuple[int, ...]
    acoustic_score: float
    lm_score: float
    combined_score: float
    end_context: int = 0


@dataclass
class RescoreStack:
    """Everything the server side owns for one decoding stream."""

    model: RnnlmModel
    tree: HuffmanTree
    table: IndexTable
    cache: RescoreCache
    ledger: TransferLedger = field(default_factory=TransferLedger)
    rnn_bits: int = 32


def small_context(history: Sequence[int], small_lm: NgramModel) -> list[int]:
    """Small-LM context from a stored word history, padded with
    sentence-begin tokens while the history is still short."""
    need = small_lm.order - 1
    hist = list(history)
    if len(hist) < need:
        hist = [small_lm.bos_id] * (need - len(hist)) + hist
    return hist


class RescoreServer:
    """CPU-side endpoint: consumes request bytes, returns response bytes."""

    def __init__(self, stack: RescoreStack, small_lm: NgramModel):
        if small_lm.order - 1 > stack.model.maxent_order:
            raise ValueError(
                "small LM order exceeds the stored context history; "
                f"need maxent_order >= {small_lm.order - 1}")
        self.stack = stack
        self.small_lm = small_lm

    def serve(self, raw: bytes) -> bytes:
        st = self.stack
        req = RescoreRequest.from_bytes(raw)
        c, small_idx = unpack(req.packed, st.rnn_bits)
        value = rnnlm_prob(st.cache, st.table, st.model, st.tree, req.w, c)
        history = st.table.decode(c).history
        p_small = ngram_logprob(self.small_lm, small_context(history, self.small_lm), req.w)
        resp = RescoreResponse.build(
            value.p - p_small, pack(value.c_next, small_idx, st.rnn_bits))
        st.ledger.record(st.table.element_bytes)
        return resp.to_bytes()


@dataclass
class TraversalReport:
    expansions: int
    cache_stats: object
    transfer: TransferLedger


def rescore_onthefly(lattice: Lattice, small_lm: NgramModel,
                     stack: RescoreStack, lm_weight: float = 1.0,
                     beam: int = 1 << 30) -> tuple[PathHypothesis, TraversalReport]:
    """Best path under the substituted-LM objective, plus ledgers.

    One request per (token, arc) expansion that survives pruning; token
    key is the successor context index; per-node beam keeps the top
    *beam* contexts by score (ties broken toward lower index).
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    server = RescoreServer(stack, small_lm)
    rnn_bits = stack.rnn_bits
    # node -> context index -> (score, backpointer id)
    tokens: dict[int, dict[int, tuple[float, int]]] = {lattice.start: {0: (0.0, -1)}}
    backptrs: list[tuple[int, int]] = []  # (previous backpointer, arc id)
    expansions = 0
    for node in lattice.topo_order:
        node_tokens = tokens.get(node)
        if not node_tokens:
            continue
        ranked = sorted(node_tokens.items(), key=lambda kv: (-kv[1][0], kv[0]))
        for ctx_idx, (score, bp) in ranked[:beam]:
            for arc in lattice.out_arcs[node]:
                expansions += 1
                req = RescoreRequest(
                    packed=pack(ctx_idx, arc.id, rnn_bits),
                    w=arc.word, frame=lattice.times[arc.dst])
                resp = RescoreResponse.from_bytes(server.serve(req.to_bytes()))
                c_next, _ = unpack(resp.c_next_packed, rnn_bits)
                new_score = score + arc.acoustic + lm_weight * (arc.smalllm + resp.delta)
                slot = tokens.setdefault(arc.dst, {})
                old = slot.get(c_next)
                if old is None or new_score > old[0]:
                    backptrs.append((bp, arc.id))
                    slot[c_next] = (new_score, len(backptrs) - 1)
    best = None
    for node in sorted(lattice.finals):
        for ctx_idx, (score, bp) in sorted(tokens.get(node, {}).items()):
            if best is None or score > best[0]:
                best = (score, bp, ctx_idx)
    if best is None:
        raise ValueError("no complete path through the lattice")
    score, bp, end_ctx = best
    arc_ids: list[int] = []
    while bp >= 0:
        bp, arc_id = backptrs[bp]
        arc_ids.append(arc_id)
    arc_ids.reverse()
    arcs = [lattice.arcs[a] for a in arc_ids]
    acoustic_total = sum(a.acoustic for a in arcs)
    hyp = PathHypothesis(
        arcs=tuple(arc_ids), words=tuple(a.word for a in arcs),
        acoustic_score=acoustic_total,
        lm_score=(score - acoustic_total) / lm_weight if lm_weight else 0.0,
        combined_score=score, end_context=end_ctx)
    report = TraversalReport(expansions=expansions,
                             cache_stats=stack.cache.stats(),
                             transfer=stack.ledger)
    return hyp, report


def first_pass_weight(arc, lm_weight: float) -> float:
    return arc.acoustic + lm_weight * arc.smalllm


def nbest(lattice: Lattice, n: int, lm_weight: float = 1.0) -> list[PathHypothesis]:
    """Top-n distinct word sequences by first-pass score, descending.

    Exact best-first search: the completion heuristic is the backward
    Viterbi score, so paths pop in true score order and the first path
    for a word sequence is its best-scoring one.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    completion: dict[int, float] = {}
    for node in reversed(lattice.topo_order):
        best = 0.0 if node in lattice.finals else float("-inf")
        for arc in lattice.out_arcs[node]:
            tail = completion.get(arc.dst, float("-inf"))
            cand = first_pass_weight(arc, lm_weight) + tail
            if cand > best:
                best = cand
        completion[node] = best
    if completion.get(lattice.start, float("-inf")) == float("-inf"):
        raise ValueError("no complete path through the lattice")

    results: list[PathHypothesis] = []
    seen: set[tuple[int, ...]] = set()
    heap: list[tuple[float, int, bool, int, float, tuple[int, ...]]] = []
    counter = 0
    heappush(heap, (-completion[lattice.start], counter, False, lattice.start, 0.0, ()))
    while heap and len(results) < n:
        _, _, done, node, g, arcs = heappop(heap)
        if done:
            words = tuple(lattice.arcs[a].word for a in arcs)
            if words in seen:
                continue
            seen.add(words)
            arc_objs = [lattice.arcs[a] for a in arcs]
            ac = sum(a.acoustic for a in arc_objs)
            lm = sum(a.smalllm for a in arc_objs)
            results.append(PathHypothesis(
                arcs=arcs, words=words, acoustic_score=ac, lm_score=lm,
                combined_score=g))
            continue
        if node in lattice.finals:
            counter += 1
            heappush(heap, (-g, counter, True, node, g, arcs))
        for arc in lattice.out_arcs[node]:
            tail = completion.get(arc.dst, float("-inf"))
            if tail == float("-inf"):
                continue
            g2 = g + first_pass_weight(arc, lm_weight)
            counter += 1
            heappush(heap, (-(g2 + tail), counter, False, arc.dst, g2, arcs + (arc.id,)))
    return results


def _hybrid_logprob(lp_ngram: float, lp_rnn: float, lam: float) -> float:
    if lam >= 1.0:
        return lp_ngram
    if lam <= 0.0:
        return lp_rnn
    hi = max(lp_ngram, lp_rnn)
    return hi + math.log(lam * math.exp(lp_ngram - hi)
                         + (1.0 - lam) * math.exp(lp_rnn - hi))


def rescore_twopass(hyps: list[PathHypothesis], mode: str, model: RnnlmModel,
                    tree: HuffmanTree, small_lm: NgramModel,
                    interp_weight: float = 0.5,
                    lm_weight: float = 1.0) -> PathHypothesis:
    """Re-rank an n-best list; mode ``rnnlm`` scores words with the
    recurrent model alone, ``hybrid`` with the probability-space
    interpolation lambda * ngram + (1 - lambda) * rnnlm."""
    if mode not in ("rnnlm", "hybrid"):
        raise ValueError(f"unknown two-pass mode {mode!r}")
    if not hyps:
        raise ValueError("empty hypothesis list")
    best: PathHypothesis | None = None
    for hyp in hyps:
        ctx = model.zero_context()
        preceding: list[int] = []
        lm = 0.0
        for w in hyp.words:
            lp_rnn = word_logprob(model, tree, ctx, w)
            if mode == "rnnlm":
                lm += lp_rnn
            else:
                lp_ng = ngram_logprob(small_lm, small_context(preceding, small_lm), w)
                lm += _hybrid_logprob(lp_ng, lp_rnn, interp_weight)
            ctx = advance_context(model, ctx, w)
            preceding.append(w)
        combined = hyp.acoustic_score + lm_weight * lm
        candidate = PathHypothesis(
            arcs=hyp.arcs, words=hyp.words, acoustic_score=hyp.acoustic_score,
            lm_score=lm, combined_score=combined)
        if best is None or candidate.combined_score > best.combined_score:
            best = candidate
    return best


def rescored_path_score(lattice: Lattice, arc_ids: Sequence[int],
                        model: RnnlmModel, tree: HuffmanTree,
                        small_lm: NgramModel, lm_weight: float = 1.0) -> float:
    """Score of one concrete path under the on-the-fly objective,
    computed directly from the model (no cache, table or beam), with the
    same 4-byte delta rounding the wire format applies."""
    ctx = model.zero_context()
    score = 0.0
    for arc_id in arc_ids:
        arc = lattice.arcs[arc_id]
        p = word_logprob(model, tree, ctx, arc.word)
        p_small = ngram_logprob(small_lm, small_context(ctx.history, small_lm), arc.word)
        delta = quantize_delta(p - p_small)
        score = score + arc.acoustic + lm_weight * (arc.smalllm + delta)
        ctx = advance_context(model, ctx, arc.word)
    return score


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance between token sequences."""
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[len(hyp)]
