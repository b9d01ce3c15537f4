import struct

import numpy as np
import pytest

from otflm.context_table import (
    HISTORY_SENTINEL,
    IndexTable,
    TableFullError,
    UnknownIndexError,
)
from otflm.rnnlm import RnnlmContext


def _ctx(h_values, history):
    return RnnlmContext(np.asarray(h_values, dtype=np.float32), tuple(history))


def _random_ctx(rng, H=6, order=3):
    hidden = rng.uniform(0, 1, H).astype(np.float32)
    length = rng.randint(0, order + 1)
    history = tuple(int(w) for w in rng.randint(0, 1000, size=length))
    return RnnlmContext(hidden, history)


def test_first_context_gets_index_one():
    table = IndexTable(hidden_size=4, maxent_order=3)
    ctx = _ctx([0.1, 0.2, 0.3, 0.4], (7,))
    assert table.encode(ctx) == 1
    assert len(table) == 1


def test_duplicate_context_returns_same_index():
    table = IndexTable(hidden_size=4, maxent_order=3)
    ctx = _ctx([0.1, 0.2, 0.3, 0.4], (7, 9))
    i1 = table.encode(ctx)
    i2 = table.encode(_ctx([0.1, 0.2, 0.3, 0.4], (7, 9)))
    assert i1 == i2 == 1
    assert len(table) == 1


def test_fresh_indices_are_length_plus_one():
    table = IndexTable(hidden_size=2, maxent_order=1)
    for i in range(1, 6):
        idx = table.encode(_ctx([i * 0.125, 0.5], ()))
        assert idx == i == len(table)


def test_dedup_against_independent_set_oracle():
    rng = np.random.RandomState(6)
    table = IndexTable(hidden_size=6, maxent_order=3)
    contexts = [_random_ctx(rng) for _ in range(9900)]
    # duplicate 100 of them
    dup_sources = [contexts[int(i)] for i in rng.randint(0, 9900, size=100)]
    all_ctx = contexts + [RnnlmContext(c.hidden.copy(), c.history) for c in dup_sources]
    order = rng.permutation(len(all_ctx))
    oracle = set()
    for i in order:
        c = all_ctx[int(i)]
        table.encode(c)
        oracle.add((c.hidden.tobytes(), c.history))
    assert len(table) == len(oracle)


def test_decode_zero_is_utterance_start():
    table = IndexTable(hidden_size=5, maxent_order=3)
    ctx = table.decode(0)
    assert np.all(ctx.hidden == 0.0)
    assert ctx.history == ()


def test_round_trip_bit_exact():
    rng = np.random.RandomState(7)
    table = IndexTable(hidden_size=8, maxent_order=3)
    for _ in range(200):
        ctx = _random_ctx(rng, H=8)
        idx = table.encode(ctx)
        back = table.decode(idx)
        assert np.array_equal(back.hidden, ctx.hidden)
        assert back.history == ctx.history
        assert table.encode(back) == idx  # bijectivity both ways


def test_unknown_index_errors():
    table = IndexTable(hidden_size=3, maxent_order=2)
    table.encode(_ctx([0.5, 0.5, 0.5], ()))
    with pytest.raises(UnknownIndexError):
        table.decode(2)
    with pytest.raises(UnknownIndexError):
        table.decode(-1)


def test_table_full_error():
    table = IndexTable(hidden_size=2, maxent_order=1, max_entries=2)
    table.encode(_ctx([0.1, 0.1], ()))
    table.encode(_ctx([0.2, 0.2], ()))
    with pytest.raises(TableFullError):
        table.encode(_ctx([0.3, 0.3], ()))


def test_element_bytes_formula():
    # 4*H + 8*order + 4 + 4
    assert IndexTable(hidden_size=100, maxent_order=3).element_bytes == 432
    assert IndexTable(hidden_size=10, maxent_order=2).element_bytes == 64


def test_memory_report():
    table = IndexTable(hidden_size=100, maxent_order=3)
    assert table.memory_report() == (0, 432, 0)
    rng = np.random.RandomState(8)
    for _ in range(1000):
        table.encode(_random_ctx(rng, H=100))
    count, element_bytes, total = table.memory_report()
    assert count == 1000 and element_bytes == 432 and total == 432000
    # cross-check against actually serialized lengths
    summed = sum(len(table.serialized(i)) for i in range(1, len(table) + 1))
    assert summed == total


def test_serialized_layout():
    table = IndexTable(hidden_size=2, maxent_order=3)
    hidden = np.asarray([0.25, -1.5], dtype=np.float32)
    idx = table.encode(RnnlmContext(hidden, (5, 600)))
    raw = table.serialized(idx)
    assert len(raw) == 4 * 2 + 8 * 3 + 8
    assert raw[:8] == hidden.astype("<f4").tobytes()
    slots = struct.unpack_from("<3Q", raw, 8)
    assert slots == (5, 600, HISTORY_SENTINEL)
    order, self_idx = struct.unpack_from("<II", raw, 8 + 24)
    assert order == 3 and self_idx == idx


def test_nearby_floats_are_distinct_contexts():
    table = IndexTable(hidden_size=1, maxent_order=1)
    a = _ctx([0.5], ())
    b = _ctx([np.nextafter(np.float32(0.5), np.float32(1.0))], ())
    assert table.encode(a) != table.encode(b)


def test_deterministic_assignment_and_monotone_growth():
    rng = np.random.RandomState(12)
    seq = [_random_ctx(rng) for _ in range(500)]
    t1 = IndexTable(hidden_size=6, maxent_order=3)
    t2 = IndexTable(hidden_size=6, maxent_order=3)
    sizes = []
    for c in seq:
        i1 = t1.encode(RnnlmContext(c.hidden.copy(), c.history))
        i2 = t2.encode(RnnlmContext(c.hidden.copy(), c.history))
        assert i1 == i2
        sizes.append(len(t1))
    assert sizes == sorted(sizes)


def test_clear():
    table = IndexTable(hidden_size=2, maxent_order=1)
    table.encode(_ctx([0.1, 0.2], (3,)))
    table.clear()
    assert len(table) == 0
    with pytest.raises(UnknownIndexError):
        table.decode(1)


def test_size_mismatch_rejected():
    table = IndexTable(hidden_size=4, maxent_order=2)
    with pytest.raises(ValueError):
        table.encode(_ctx([0.1, 0.2], ()))
    with pytest.raises(ValueError):
        table.encode(_ctx([0.1] * 4, (1, 2, 3)))
