"""Memoization of (context index, word) -> (score, successor index).

The lookup procedure: check the cache; on a miss decode the context,
run the recurrent model (score + advance), encode the successor with
dedup, store, return. Enabling or disabling the cache never changes a
returned value, only how often the model actually runs.

Capacity 0 means unbounded. A positive byte capacity is enforced by
evicting least-frequently-used entries (least-recently-used breaks
ties) until the new entry fits; entries are accounted at a fixed 32
bytes (8+8 key, 8+8 value). Per-utterance stats can be rolled into
cumulative counters at utterance boundaries, with or without clearing
the stored entries.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

from otflm.context_table import IndexTable
from otflm.huffman import HuffmanTree
from otflm.rnnlm import RnnlmModel, compute_rnnlm

ENTRY_BYTES = 32  # key: 8-byte index + 8-byte word; value: 8-byte score + 8-byte index

CacheKey = tuple[int, int]  # (context index, word id)


@dataclass(frozen=True)
class CacheValue:
    p: float
    c_next: int


@dataclass
class CacheStats:
    lookups: int = 0
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    resident_bytes: int = 0

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0

    def line(self) -> str:
        return (f"lookups={self.lookups} hits={self.hits} "
                f"hit_ratio={self.hit_ratio:.6f} "
                f"resident_bytes={self.resident_bytes} evictions={self.evictions}")

    def add(self, other: "CacheStats") -> None:
        self.lookups += other.lookups
        self.hits += other.hits
        self.misses += other.misses
        self.evictions += other.evictions


class RescoreCache:
    def __init__(self, capacity_bytes: int = 0, enabled: bool = True):
        if capacity_bytes < 0:
            raise ValueError("capacity_bytes must be >= 0")
        self.capacity_bytes = capacity_bytes
        self.enabled = enabled
        self._entries: dict[CacheKey, CacheValue] = {}
        self._freq: dict[CacheKey, int] = {}
        self._last_use: dict[CacheKey, int] = {}
        self._heap: list[tuple[int, int, CacheKey]] = []
        self._seq = 0
        self._current = CacheStats()
        self._cumulative = CacheStats()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def resident_bytes(self) -> int:
        return len(self._entries) * ENTRY_BYTES

    def get(self, key: CacheKey) -> Optional[CacheValue]:
        self._current.lookups += 1
        if not self.enabled:
            self._current.misses += 1
            return None
        value = self._entries.get(key)
        if value is None:
            self._current.misses += 1
            return None
        self._current.hits += 1
        self._seq += 1
        self._freq[key] += 1
        self._last_use[key] = self._seq
        heapq.heappush(self._heap, (self._freq[key], self._seq, key))
        return value

    def put(self, key: CacheKey, value: CacheValue) -> None:
        if not self.enabled or key in self._entries:
            return
        if self.capacity_bytes > 0:
            self._evict_until_fits(ENTRY_BYTES)
            if self.resident_bytes + ENTRY_BYTES > self.capacity_bytes:
                return  # capacity smaller than one entry
        self._seq += 1
        self._entries[key] = value
        self._freq[key] = 1
        self._last_use[key] = self._seq
        heapq.heappush(self._heap, (1, self._seq, key))

    def _evict_until_fits(self, incoming: int) -> None:
        while self._entries and self.resident_bytes + incoming > self.capacity_bytes:
            self._evict_one()

    def _evict_one(self) -> None:
        # stale heap entries (superseded freq/seq) are skipped lazily
        while self._heap:
            freq, seq, key = heapq.heappop(self._heap)
            if self._freq.get(key) == freq and self._last_use.get(key) == seq:
                del self._entries[key]
                del self._freq[key]
                del self._last_use[key]
                self._current.evictions += 1
                return
        raise AssertionError("eviction requested on empty cache")

    def set_capacity(self, capacity_bytes: int) -> None:
        """Change the byte bound; 0 removes it. Shrinking evicts at once."""
        if capacity_bytes < 0:
            raise ValueError("capacity_bytes must be >= 0")
        self.capacity_bytes = capacity_bytes
        if capacity_bytes > 0:
            while self._entries and self.resident_bytes > capacity_bytes:
                self._evict_one()

    def clear(self) -> None:
        self._entries.clear()
        self._freq.clear()
        self._last_use.clear()
        self._heap.clear()

    def stats(self) -> CacheStats:
        """Counters for the current utterance window."""
        s = CacheStats(lookups=self._current.lookups, hits=self._current.hits,
                       misses=self._current.misses, evictions=self._current.evictions,
                       resident_bytes=self.resident_bytes)
        return s

    def cumulative_stats(self) -> CacheStats:
        s = CacheStats(lookups=self._cumulative.lookups, hits=self._cumulative.hits,
                       misses=self._cumulative.misses, evictions=self._cumulative.evictions,
                       resident_bytes=self.resident_bytes)
        s.add(self._current)
        return s

    def roll_stats(self) -> None:
        self._cumulative.add(self._current)
        self._current = CacheStats()

    def frequencies(self) -> dict[CacheKey, int]:
        """Copy of the use counts (for eviction-policy checks)."""
        return dict(self._freq)


def rnnlm_prob(cache: RescoreCache, table: IndexTable, model: RnnlmModel,
               tree: HuffmanTree, w: int, c: int) -> CacheValue:
    """Cached probability of word *w* following stored context *c*.

    On a miss the context is decoded, the model scores the word and
    advances, the successor is encoded (deduplicated), and the entry is
    stored. The returned value is bit-identical to the uncached
    computation either way.
    """
    key = (int(c), int(w))
    value = cache.get(key)
    if value is not None:
        return value
    ctx = table.decode(c)
    p, nxt = compute_rnnlm(model, tree, ctx, w)
    value = CacheValue(p=p, c_next=table.encode(nxt))
    cache.put(key, value)
    return value


def reset_utterance(cache: RescoreCache, table: IndexTable, retain: bool) -> None:
    """Utterance boundary: roll per-utterance stats into the cumulative
    counters; clear the cache and the index table unless *retain*."""
    cache.roll_stats()
    if not retain:
        cache.clear()
        table.clear()
