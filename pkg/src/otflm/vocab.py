"""Vocabulary construction from line-oriented corpora.

Conventions:

* one sentence per line, whitespace tokenized, UTF-8;
* three special tokens are always present: ``<unk>`` (id 0), ``<s>``
  (id 1) and ``</s>`` (id 2);
* words below the frequency threshold are folded into ``<unk>``;
* boundary tokens count once per sentence, so their frequencies are
  meaningful to the tree builder.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

UNK_TOKEN = "<unk>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"


class EmptyCorpusError(ValueError):
    """Corpus stream contained no tokens at all."""


@dataclass
class Vocabulary:
    """Dense word<->id mapping with per-id frequency counts.

    Ids are 0..n-1 in the order of ``words``; ``ids`` is the inverse
    mapping. ``counts[i]`` is the corpus frequency of ``words[i]`` (at
    least 1 for every stored word).
    """

    words: list[str]
    counts: list[int]
    ids: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        self.ids = {w: i for i, w in enumerate(self.words)}
        if len(self.ids) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    @property
    def size(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return len(self.words)

    @property
    def unk_id(self) -> int:
        return self.ids[UNK_TOKEN]

    @property
    def sentence_begin_id(self) -> int:
        return self.ids[BOS_TOKEN]

    @property
    def sentence_end_id(self) -> int:
        return self.ids[EOS_TOKEN]

    def id_of(self, word: str) -> int:
        """Id for *word*, folding unknown words to ``<unk>``."""
        return self.ids.get(word, self.unk_id)

    def tokenize(self, line: str) -> list[int]:
        unk = self.unk_id
        return [self.ids.get(w, unk) for w in line.split()]

    def save(self, path: str | Path) -> None:
        """Write ``word<TAB>count`` lines; line order defines the id."""
        with open(path, "w", encoding="utf-8") as fh:
            for word, count in zip(self.words, self.counts):
                fh.write(f"{word}\t{count}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        words: list[str] = []
        counts: list[int] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    word, count = line.split("\t")
                    counts.append(int(count))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: malformed vocabulary line") from exc
                words.append(word)
        return cls(words=words, counts=counts)


def _iter_lines(corpus: Iterable[str] | str | Path) -> Iterable[str]:
    if isinstance(corpus, (str, Path)):
        with open(corpus, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from corpus


def build_vocabulary(corpus: Iterable[str] | str | Path, min_count: int = 1) -> Vocabulary:
    """Count words in a line-oriented corpus and build a :class:`Vocabulary`.

    Words with frequency < *min_count* are folded into ``<unk>``; the
    boundary tokens ``<s>``/``</s>`` are counted once per non-empty
    sentence. Word ids are assigned specials-first, then by descending
    count (ties alphabetical) so the layout is reproducible.

    Raises :class:`EmptyCorpusError` when the stream holds no tokens.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    raw = Counter()
    n_sentences = 0
    for line in _iter_lines(corpus):
        tokens = line.split()
        if not tokens:
            continue
        n_sentences += 1
        raw.update(tokens)
    if n_sentences == 0:
        raise EmptyCorpusError("corpus contains no sentences")

    for special in (UNK_TOKEN, BOS_TOKEN, EOS_TOKEN):
        raw.pop(special, None)

    kept = [(w, c) for w, c in raw.items() if c >= min_count]
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    folded = sum(c for _, c in raw.items() if c < min_count)

    words = [UNK_TOKEN, BOS_TOKEN, EOS_TOKEN] + [w for w, _ in kept]
    counts = [max(1, folded), n_sentences, n_sentences] + [c for _, c in kept]
    return Vocabulary(words=words, counts=counts)


def read_sentences(corpus: Iterable[str] | str | Path, vocab: Vocabulary) -> list[list[int]]:
    """Tokenize a corpus into id sentences, skipping empty lines."""
    sentences = []
    for line in _iter_lines(corpus):
        ids = vocab.tokenize(line)
        if ids:
            sentences.append(ids)
    return sentences


def corpus_from_string(text: str) -> io.StringIO:
    """Convenience wrapper for inline corpora in tests and docs."""
    return io.StringIO(text)
