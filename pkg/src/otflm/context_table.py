"""Bidirectional table mapping full recurrent contexts to 8-byte indices.

Only indices cross the simulated device boundary; the full contexts
stay here. Index 0 is reserved for the utterance-start context (zero
hidden state, empty history) and is never stored; fresh contexts get
``len(table) + 1``, and encoding a context that is already stored
returns its existing index (equality is bit-exact on the serialized
hidden vector plus history).

Serialized element layout (little-endian), ``4*H + 8*order + 8`` bytes,
432 with the default H=100 / order-3 geometry::

    f32[H]      hidden state
    u64[order]  history word ids, oldest first, empty slots all-ones
    u32         maxent order (stored per element for layout fidelity)
    u32         the element's own index

The trailing order/self-index words are bookkeeping, not part of the
dedup key. Reverse lookup goes through a 128-bit digest of the key
bytes; digest collisions fall back to full byte comparison, so
correctness never depends on the digest.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from otflm.rnnlm import RnnlmContext

HISTORY_SENTINEL = 0xFFFFFFFFFFFFFFFF


class UnknownIndexError(KeyError):
    """Index was never assigned: decoder and rescorer are out of sync."""


class TableFullError(RuntimeError):
    """Index space exhausted."""


def _digest(key: bytes) -> bytes:
    return hashlib.blake2b(key, digest_size=16).digest()


class IndexTable:
    def __init__(self, hidden_size: int, maxent_order: int,
                 max_entries: int = (1 << 64) - 2):
        self.hidden_size = hidden_size
        self.maxent_order = maxent_order
        self.max_entries = max_entries
        self._forward: list[bytes] = []
        self._reverse: dict[bytes, list[int]] = {}

    def __len__(self) -> int:
        return len(self._forward)

    @property
    def element_bytes(self) -> int:
        return 4 * self.hidden_size + 8 * self.maxent_order + 8

    def _key_bytes(self, ctx: RnnlmContext) -> bytes:
        if ctx.hidden.shape != (self.hidden_size,):
            raise ValueError(
                f"context hidden size {ctx.hidden.shape} does not match table H={self.hidden_size}")
        if len(ctx.history) > self.maxent_order:
            raise ValueError("context history longer than table maxent order")
        slots = list(ctx.history) + [HISTORY_SENTINEL] * (self.maxent_order - len(ctx.history))
        return (np.ascontiguousarray(ctx.hidden, dtype="<f4").tobytes()
                + struct.pack(f"<{self.maxent_order}Q", *slots))

    def encode(self, ctx: RnnlmContext) -> int:
        """Index for *ctx*, storing it first if unseen."""
        key = self._key_bytes(ctx)
        digest = _digest(key)
        for idx in self._reverse.get(digest, ()):
            if self._forward[idx - 1][:len(key)] == key:
                return idx
        if len(self._forward) >= self.max_entries:
            raise TableFullError(f"index table full at {self.max_entries} entries")
        idx = len(self._forward) + 1
        self._forward.append(key + struct.pack("<II", self.maxent_order, idx))
        self._reverse.setdefault(digest, []).append(idx)
        return idx

    def decode(self, idx: int) -> RnnlmContext:
        """Stored context for *idx*; index 0 is the utterance-start context."""
        idx = int(idx)
        if idx == 0:
            return RnnlmContext(np.zeros(self.hidden_size, dtype=np.float32), ())
        if not 1 <= idx <= len(self._forward):
            raise UnknownIndexError(
                f"index {idx} not in table (length {len(self._forward)})")
        raw = self._forward[idx - 1]
        H = self.hidden_size
        hidden = np.frombuffer(raw, dtype="<f4", count=H).copy()
        slots = struct.unpack_from(f"<{self.maxent_order}Q", raw, 4 * H)
        history = tuple(int(w) for w in slots if w != HISTORY_SENTINEL)
        stored_order, stored_idx = struct.unpack_from("<II", raw, 4 * H + 8 * self.maxent_order)
        if stored_idx != idx or stored_order != self.maxent_order:
            raise UnknownIndexError(f"corrupt element at index {idx}")
        return RnnlmContext(hidden, history)

    def serialized(self, idx: int) -> bytes:
        """Raw stored bytes of an element (for accounting cross-checks)."""
        if not 1 <= idx <= len(self._forward):
            raise UnknownIndexError(f"index {idx} not in table")
        return self._forward[idx - 1]

    def memory_report(self) -> tuple[int, int, int]:
        """(element_count, element_bytes, total_bytes)."""
        count = len(self._forward)
        return count, self.element_bytes, count * self.element_bytes

    def clear(self) -> None:
        self._forward.clear()
        self._reverse.clear()
