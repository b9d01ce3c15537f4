"""Time-stamped word lattices and a synthetic lattice generator.

A lattice is an acyclic graph of word arcs carrying an acoustic score
and the short-span LM score (both natural logs). The generator stands
in for an acoustic front end: given a reference sentence it emits the
reference path plus confusable alternatives, with nodes expanded on the
small LM's context so every arc's stored LM score is exact for any path
through it.

Text format, one arc per line::

    start <node>
    <from> <to> <word-id> <acoustic> <smalllm>
    final <node> [<node> ...]

Scores are printed with full precision so files round-trip exactly. The
loader validates acyclicity and derives node times as longest distance
from the start node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from otflm.ngram import NgramModel, ngram_logprob
from otflm.vocab import Vocabulary


class LatticeFormatError(ValueError):
    """Malformed lattice text; message carries the line number."""


@dataclass(frozen=True)
class Arc:
    id: int
    src: int
    dst: int
    word: int
    acoustic: float
    smalllm: float


@dataclass
class Lattice:
    start: int
    finals: set[int]
    arcs: list[Arc]
    n_nodes: int = field(init=False)
    out_arcs: dict[int, list[Arc]] = field(init=False, repr=False)
    topo_order: list[int] = field(init=False, repr=False)
    times: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = {self.start} | set(self.finals)
        for a in self.arcs:
            nodes.add(a.src)
            nodes.add(a.dst)
        self.n_nodes = len(nodes)
        self.out_arcs = {n: [] for n in nodes}
        in_deg = {n: 0 for n in nodes}
        for a in self.arcs:
            self.out_arcs[a.src].append(a)
            in_deg[a.dst] += 1
        # Kahn's algorithm; smallest-id-first queue keeps the order stable
        order: list[int] = []
        ready = sorted(n for n, d in in_deg.items() if d == 0)
        times = {n: 0 for n in ready}
        while ready:
            n = ready.pop(0)
            order.append(n)
            for a in self.out_arcs[n]:
                t = times[n] + 1
                if times.get(a.dst, -1) < t:
                    times[a.dst] = t
                in_deg[a.dst] -= 1
                if in_deg[a.dst] == 0:
                    ready.append(a.dst)
            ready.sort()
        if len(order) != len(nodes):
            raise LatticeFormatError("lattice contains a cycle")
        self.topo_order = order
        self.times = times

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"start {self.start}\n")
            for a in self.arcs:
                fh.write(f"{a.src} {a.dst} {a.word} {a.acoustic!r} {a.smalllm!r}\n")
            fh.write("final " + " ".join(str(n) for n in sorted(self.finals)) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Lattice":
        start = None
        finals: set[int] = set()
        arcs: list[Arc] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                try:
                    if parts[0] == "start":
                        start = int(parts[1])
                    elif parts[0] == "final":
                        finals.update(int(p) for p in parts[1:])
                    else:
                        if len(parts) != 5:
                            raise ValueError("expected 5 fields")
                        arcs.append(Arc(
                            id=len(arcs), src=int(parts[0]), dst=int(parts[1]),
                            word=int(parts[2]), acoustic=float(parts[3]),
                            smalllm=float(parts[4]),
                        ))
                except (ValueError, IndexError) as exc:
                    raise LatticeFormatError(f"{path}:{lineno}: {exc}") from exc
        if start is None:
            raise LatticeFormatError(f"{path}: missing start line")
        if not finals:
            raise LatticeFormatError(f"{path}: missing final line")
        try:
            return cls(start=start, finals=finals, arcs=arcs)
        except LatticeFormatError as exc:
            raise LatticeFormatError(f"{path}: {exc}") from exc


def generate_lattice(reference: Sequence[int], vocab: Vocabulary,
                     small_lm: NgramModel, confusion_breadth: int,
                     noise_seed: int) -> Lattice:
    """Sausage-style lattice around a reference word sequence.

    Each position offers the reference word plus ``confusion_breadth - 1``
    confusable alternatives (sampled once per position, so the same word
    at the same position always carries the same synthetic acoustic
    penalty; reference arcs cost 0). Nodes are expanded on the small
    LM's context so each arc's stored LM score equals the model's score
    for that arc's word given the path context. Deterministic for a
    fixed seed.
    """
    reference = [int(w) for w in reference]
    if not reference:
        raise ValueError("reference must be non-empty")
    if confusion_breadth < 1:
        raise ValueError("confusion_breadth must be >= 1")
    rng = np.random.Generator(np.random.PCG64(noise_seed))
    specials = {vocab.unk_id, vocab.sentence_begin_id, vocab.sentence_end_id}
    pool = [w for w in range(vocab.size) if w not in specials]

    candidates: list[list[tuple[int, float]]] = []
    for pos, ref_w in enumerate(reference):
        alts = [w for w in pool if w != ref_w]
        n_alt = min(confusion_breadth - 1, len(alts))
        chosen = list(rng.choice(alts, size=n_alt, replace=False)) if n_alt else []
        cand = [(ref_w, 0.0)]
        for w in chosen:
            cand.append((int(w), -abs(float(rng.normal(1.0, 0.5)))))
        candidates.append(cand)

    k = max(small_lm.order - 1, 0)
    bos = vocab.sentence_begin_id
    start_hist = (bos,) * k
    node_ids: dict[tuple[int, tuple[int, ...]], int] = {(0, start_hist): 0}
    frontier: list[tuple[int, ...]] = [start_hist]
    arcs: list[Arc] = []
    for pos, cand in enumerate(candidates):
        next_frontier: dict[tuple[int, ...], None] = {}
        for hist in frontier:
            src = node_ids[(pos, hist)]
            for w, ac in cand:
                slm = ngram_logprob(small_lm, hist, w)
                nxt = (hist + (w,))[-k:] if k else ()
                key = (pos + 1, nxt)
                if key not in node_ids:
                    node_ids[key] = len(node_ids)
                arcs.append(Arc(id=len(arcs), src=src, dst=node_ids[key],
                                word=w, acoustic=ac, smalllm=slm))
                next_frontier[nxt] = None
        frontier = list(next_frontier)
    finals = {node_ids[(len(candidates), h)] for h in frontier}
    return Lattice(start=0, finals=finals, arcs=arcs)
