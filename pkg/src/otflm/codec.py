"""Wire format for the simulated search<->rescorer boundary.

Per rescoring transaction two fixed-size messages cross the boundary
(little-endian; see also docs/protocol.md):

* request, 16 bytes: ``u64`` packed indices + ``u32`` word id +
  ``u32`` frame id;
* response, 16 bytes: ``f32`` score delta (recurrent-LM minus small-LM)
  + ``u64`` packed successor indices + 4 pad bytes.

The packed value concatenates the recurrent-LM context index (high
``rnn_bits``) with the small-LM state index (low ``64 - rnn_bits``),
default split 32/32. The ledger compares these 32 bytes per transaction
against shipping the whole serialized context in each direction, which
is what the index table avoids.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

REQUEST_BYTES = 16
RESPONSE_BYTES = 16
DEFAULT_RNN_BITS = 32

_REQUEST_STRUCT = struct.Struct("<QII")
_RESPONSE_STRUCT = struct.Struct("<fQ4x")


class PackOverflowError(ValueError):
    """An index does not fit its configured bit budget."""


def pack(rnnlm_index: int, smalllm_index: int, rnn_bits: int = DEFAULT_RNN_BITS) -> int:
    """Concatenate the two indices into one 8-byte value."""
    if not 1 <= rnn_bits <= 63:
        raise ValueError(f"rnn_bits must be in 1..63, got {rnn_bits}")
    small_bits = 64 - rnn_bits
    if not 0 <= rnnlm_index < (1 << rnn_bits):
        raise PackOverflowError(
            f"rnnlm_index {rnnlm_index} does not fit in {rnn_bits} bits")
    if not 0 <= smalllm_index < (1 << small_bits):
        raise PackOverflowError(
            f"smalllm_index {smalllm_index} does not fit in {small_bits} bits")
    return (rnnlm_index << small_bits) | smalllm_index


def unpack(value: int, rnn_bits: int = DEFAULT_RNN_BITS) -> tuple[int, int]:
    """Inverse of :func:`pack`."""
    if not 1 <= rnn_bits <= 63:
        raise ValueError(f"rnn_bits must be in 1..63, got {rnn_bits}")
    small_bits = 64 - rnn_bits
    return value >> small_bits, value & ((1 << small_bits) - 1)


def quantize_delta(delta: float) -> float:
    """The response carries the delta as a 4-byte real; round accordingly."""
    return struct.unpack("<f", struct.pack("<f", delta))[0]


@dataclass(frozen=True)
class RescoreRequest:
    packed: int
    w: int
    frame: int

    def to_bytes(self) -> bytes:
        return _REQUEST_STRUCT.pack(self.packed, self.w, self.frame)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "RescoreRequest":
        packed, w, frame = _REQUEST_STRUCT.unpack(raw)
        return cls(packed=packed, w=w, frame=frame)


@dataclass(frozen=True)
class RescoreResponse:
    delta: float
    c_next_packed: int

    @classmethod
    def build(cls, delta: float, c_next_packed: int) -> "RescoreResponse":
        return cls(delta=quantize_delta(delta), c_next_packed=c_next_packed)

    def to_bytes(self) -> bytes:
        return _RESPONSE_STRUCT.pack(self.delta, self.c_next_packed)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "RescoreResponse":
        delta, packed = _RESPONSE_STRUCT.unpack(raw)
        return cls(delta=delta, c_next_packed=packed)


@dataclass
class TransferLedger:
    """Byte accounting for one decoding stream."""

    requests: int = 0
    bytes_indexed: int = 0
    bytes_full_baseline: int = 0
    request_bytes: int = field(default=REQUEST_BYTES, repr=False)
    response_bytes: int = field(default=RESPONSE_BYTES, repr=False)

    def record(self, context_bytes: int) -> None:
        """One transaction: indexed messages both ways versus shipping the
        whole context both ways."""
        self.requests += 1
        self.bytes_indexed += self.request_bytes + self.response_bytes
        self.bytes_full_baseline += 2 * context_bytes


def reduction_ratio(ledger: TransferLedger, context_bytes: int) -> float:
    """Baseline bytes over indexed bytes, with the baseline shipping
    *context_bytes* per message leg and the indexed path shipping the
    fixed 16-byte messages."""
    if ledger.requests == 0:
        raise ValueError("no requests recorded")
    baseline = ledger.requests * 2 * context_bytes
    return baseline / ledger.bytes_indexed
