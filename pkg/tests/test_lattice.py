import numpy as np
import pytest

from otflm.lattice import Arc, Lattice, LatticeFormatError, generate_lattice
from otflm.ngram import ngram_logprob

from conftest import enumerate_paths, make_lattice


def test_breadth_one_is_linear_reference_path(small_setup):
    vocab = small_setup["vocab"]
    ref = vocab.tokenize(small_setup["lines"][0])
    lat = generate_lattice(ref, vocab, small_setup["bigram"], 1, noise_seed=5)
    paths = enumerate_paths(lat)
    assert len(paths) == 1
    words = [lat.arcs[a].word for a in paths[0]]
    assert words == ref
    assert all(lat.arcs[a].acoustic == 0.0 for a in paths[0])


def test_path_count_bounded_by_breadth_power_length(small_setup):
    vocab = small_setup["vocab"]
    ref = vocab.tokenize(small_setup["lines"][1])[:5]
    lat = generate_lattice(ref, vocab, small_setup["bigram"], 3, noise_seed=6)
    paths = enumerate_paths(lat)
    assert 1 <= len(paths) <= 3 ** len(ref)
    # the reference path is recoverable
    ref_paths = [p for p in paths if [lat.arcs[a].word for a in p] == ref]
    assert len(ref_paths) == 1


def test_same_seed_is_bit_identical(small_setup):
    vocab = small_setup["vocab"]
    ref = vocab.tokenize(small_setup["lines"][2])
    l1 = generate_lattice(ref, vocab, small_setup["bigram"], 3, noise_seed=77)
    l2 = generate_lattice(ref, vocab, small_setup["bigram"], 3, noise_seed=77)
    assert l1.arcs == l2.arcs
    assert l1.finals == l2.finals


def test_arc_smalllm_scores_match_model(small_setup):
    """Every arc's stored LM score equals the small LM's score for the
    arc's word given the path context (checked along every path)."""
    vocab, bigram = small_setup["vocab"], small_setup["bigram"]
    ref = vocab.tokenize(small_setup["lines"][3])[:4]
    lat = generate_lattice(ref, vocab, bigram, 3, noise_seed=8)
    for path in enumerate_paths(lat):
        ctx = [vocab.sentence_begin_id]
        for arc_id in path:
            arc = lat.arcs[arc_id]
            assert arc.smalllm == ngram_logprob(bigram, ctx, arc.word)
            ctx.append(arc.word)


def test_generator_validation(small_setup):
    vocab, bigram = small_setup["vocab"], small_setup["bigram"]
    with pytest.raises(ValueError):
        generate_lattice([], vocab, bigram, 3, noise_seed=1)
    with pytest.raises(ValueError):
        generate_lattice([3], vocab, bigram, 0, noise_seed=1)


def test_text_round_trip_exact(tmp_path, small_setup):
    lat = make_lattice(small_setup, line_index=4)
    path = tmp_path / "a.lat"
    lat.save(path)
    loaded = Lattice.load(path)
    assert loaded.start == lat.start
    assert loaded.finals == lat.finals
    assert loaded.arcs == lat.arcs  # float fields round-trip exactly via repr
    assert loaded.times == lat.times


def test_loader_errors_name_line_numbers(tmp_path):
    bad = tmp_path / "bad.lat"
    bad.write_text("start 0\n0 1 3 0.0\nfinal 1\n")  # 4 fields on line 2
    with pytest.raises(LatticeFormatError, match=r"bad\.lat:2"):
        Lattice.load(bad)
    bad.write_text("start 0\n0 1 x 0.0 0.0\nfinal 1\n")
    with pytest.raises(LatticeFormatError, match=":2"):
        Lattice.load(bad)


def test_loader_requires_start_and_final(tmp_path):
    p = tmp_path / "nostart.lat"
    p.write_text("0 1 3 0.0 -1.0\nfinal 1\n")
    with pytest.raises(LatticeFormatError, match="start"):
        Lattice.load(p)
    p.write_text("start 0\n0 1 3 0.0 -1.0\n")
    with pytest.raises(LatticeFormatError, match="final"):
        Lattice.load(p)


def test_cycle_detected():
    arcs = [Arc(0, 0, 1, 3, 0.0, -1.0), Arc(1, 1, 0, 4, 0.0, -1.0)]
    with pytest.raises(LatticeFormatError, match="cycle"):
        Lattice(start=0, finals={1}, arcs=arcs)


def test_times_are_topological(small_setup):
    lat = make_lattice(small_setup, line_index=5)
    for arc in lat.arcs:
        assert lat.times[arc.src] < lat.times[arc.dst]
    assert lat.times[lat.start] == 0
