from collections import Counter

import pytest

from otflm.synth import zipfian_corpus
from otflm.vocab import (
    BOS_TOKEN,
    EOS_TOKEN,
    UNK_TOKEN,
    EmptyCorpusError,
    Vocabulary,
    build_vocabulary,
    corpus_from_string,
)


def test_direct_counts():
    vocab = build_vocabulary(corpus_from_string("a b\na c\n"), min_count=1)
    assert vocab.counts[vocab.ids["a"]] == 2
    assert vocab.counts[vocab.ids["b"]] == 1
    assert vocab.counts[vocab.ids["c"]] == 1
    for tok in (UNK_TOKEN, BOS_TOKEN, EOS_TOKEN):
        assert tok in vocab.ids


def test_threshold_folds_into_unk():
    vocab = build_vocabulary(corpus_from_string("a b\na c\n"), min_count=2)
    assert "b" not in vocab.ids
    assert "c" not in vocab.ids
    assert vocab.counts[vocab.unk_id] == 2
    assert vocab.id_of("b") == vocab.unk_id


def test_zipfian_corpus_against_counting_oracle():
    lines = zipfian_corpus(4000, 600, seed=3)
    min_count = 3
    vocab = build_vocabulary(lines, min_count=min_count)
    # independent single-pass count
    oracle = Counter(w for line in lines for w in line.split())
    expected = {w for w, c in oracle.items() if c >= min_count}
    assert set(vocab.words) - {UNK_TOKEN, BOS_TOKEN, EOS_TOKEN} == expected
    assert vocab.size == len(expected) + 3
    for w in expected:
        assert vocab.counts[vocab.ids[w]] == oracle[w]
    assert vocab.counts[vocab.unk_id] == max(
        1, sum(c for w, c in oracle.items() if c < min_count))


def test_ids_dense_and_bijective():
    vocab = build_vocabulary(corpus_from_string("x y z y\nz z q\n"))
    assert sorted(vocab.ids.values()) == list(range(vocab.size))
    assert all(vocab.words[i] == w for w, i in vocab.ids.items())
    assert all(c >= 1 for c in vocab.counts)


def test_empty_corpus_distinct_error():
    with pytest.raises(EmptyCorpusError):
        build_vocabulary(corpus_from_string(""))
    with pytest.raises(EmptyCorpusError):
        build_vocabulary(corpus_from_string("\n\n \n"))


def test_unreadable_stream_is_io_error(tmp_path):
    with pytest.raises(OSError):
        build_vocabulary(tmp_path / "does_not_exist.txt")


def test_min_count_validation():
    with pytest.raises(ValueError):
        build_vocabulary(corpus_from_string("a b"), min_count=0)


def test_save_load_round_trip(tmp_path):
    vocab = build_vocabulary(corpus_from_string("a b c a\nb a\n"))
    path = tmp_path / "vocab.tsv"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.words == vocab.words
    assert loaded.counts == vocab.counts
    assert loaded.ids == vocab.ids


def test_tokenize_folds_unknown():
    vocab = build_vocabulary(corpus_from_string("a b\n"))
    assert vocab.tokenize("a zzz b") == [vocab.ids["a"], vocab.unk_id, vocab.ids["b"]]
