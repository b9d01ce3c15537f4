"""Cross-checks between the numba kernels and the pure-numpy fallback.

Both backends implement the same contracts; scoring quantities agree to
float64 tolerance and the feature hash agrees exactly (it is part of
the model file contract).
"""

import numpy as np
import pytest

from otflm import _kernels_np as knp
from otflm.huffman import build_huffman
from otflm.rnnlm import RnnlmModel
from otflm.synth import zipfian_corpus
from otflm.vocab import build_vocabulary

knb = pytest.importorskip("otflm._kernels_nb")


@pytest.fixture(scope="module")
def setup():
    lines = zipfian_corpus(60, 25, seed=14)
    vocab = build_vocabulary(lines)
    tree = build_huffman(vocab)
    model = RnnlmModel.new(vocab.size, hidden_size=9, maxent_order=3,
                           maxent_table_bits=8, seed=8)
    rng = np.random.RandomState(2)
    model.node_vectors[:] = rng.uniform(-0.4, 0.4, model.node_vectors.shape).astype(np.float32)
    model.maxent_table[:] = rng.uniform(-0.2, 0.2, model.maxent_size).astype(np.float32)
    return vocab, tree, model


def _kernel_args(model):
    return (model.maxent_order, np.uint64(model.hash_seed), model.hash_mask)


def test_feature_index_agrees_exactly(setup):
    _, _, model = setup
    rng = np.random.RandomState(4)
    for _ in range(300):
        k = int(rng.randint(1, 4))
        words = rng.randint(0, 10**6, size=k).astype(np.int64)
        node = int(rng.randint(0, 10**4))
        a = int(knp.feature_index(np.uint64(model.hash_seed), k, words, node,
                                  model.hash_mask))
        b = int(knb.feature_index(np.uint64(model.hash_seed), k, words, node,
                                  model.hash_mask))
        assert a == b


def test_advance_hidden_agrees(setup):
    _, _, model = setup
    rng = np.random.RandomState(5)
    for _ in range(30):
        h = rng.uniform(0, 1, model.hidden_size).astype(np.float32)
        w = int(rng.randint(0, model.vocab_size))
        a = knp.advance_hidden(model.input_weights[w], model.recurrent_weights, h)
        b = knb.advance_hidden(model.input_weights[w], model.recurrent_weights, h)
        assert np.allclose(a, b, atol=1e-7)


def test_word_and_all_logprobs_agree(setup):
    _, tree, model = setup
    rng = np.random.RandomState(6)
    for _ in range(10):
        h = rng.uniform(0, 1, model.hidden_size).astype(np.float32)
        hist = rng.randint(0, model.vocab_size,
                           size=rng.randint(0, 4)).astype(np.int64)
        a = knp.all_word_logprobs(h, hist, tree.path_nodes, tree.path_signs,
                                  tree.path_offsets, model.node_vectors,
                                  model.maxent_table, *_kernel_args(model))
        b = knb.all_word_logprobs(h, hist, tree.path_nodes, tree.path_signs,
                                  tree.path_offsets, model.node_vectors,
                                  model.maxent_table, *_kernel_args(model))
        assert np.allclose(a, b, atol=1e-10)
        w = int(rng.randint(0, model.vocab_size))
        o0, o1 = tree.path_offsets[w], tree.path_offsets[w + 1]
        pa = knp.word_logprob(h, hist, tree.path_nodes[o0:o1],
                              tree.path_signs[o0:o1], model.node_vectors,
                              model.maxent_table, *_kernel_args(model))
        pb = knb.word_logprob(h, hist, tree.path_nodes[o0:o1],
                              tree.path_signs[o0:o1], model.node_vectors,
                              model.maxent_table, *_kernel_args(model))
        assert pa == pytest.approx(pb, abs=1e-10)


def test_sentence_loss_and_grads_agree(setup):
    vocab, tree, model = setup
    rng = np.random.RandomState(7)
    tokens = rng.randint(0, model.vocab_size, size=12).astype(np.int64)
    w64 = (model.input_weights.astype(np.float64),
           model.recurrent_weights.astype(np.float64),
           model.node_vectors.astype(np.float64),
           model.maxent_table.astype(np.float64))
    args = (tree.path_nodes, tree.path_signs, tree.path_offsets,
            *_kernel_args(model))
    la = knp.sentence_loss(tokens, *w64, *args)
    lb = knb.sentence_loss(tokens, *w64, *args)
    assert la == pytest.approx(lb, rel=1e-12)

    ga = [np.zeros_like(w) for w in w64]
    gb = [np.zeros_like(w) for w in w64]
    knp.sentence_grads(tokens, *w64, *args, *ga)
    knb.sentence_grads(tokens, *w64, *args, *gb)
    for a, b in zip(ga, gb):
        assert np.allclose(a, b, atol=1e-10)


def test_train_sentence_agrees_between_backends(setup):
    vocab, tree, model = setup
    rng = np.random.RandomState(8)
    tokens = rng.randint(0, model.vocab_size, size=10).astype(np.int64)

    def run(kmod):
        arrs = tuple(getattr(model, n).copy() for n in
                     ("input_weights", "recurrent_weights",
                      "node_vectors", "maxent_table"))
        loss = kmod.train_sentence(tokens, *arrs, tree.path_nodes,
                                   tree.path_signs, tree.path_offsets,
                                   *_kernel_args(model), 0.1, 3)
        return loss, arrs

    la, wa = run(knp)
    lb, wb = run(knb)
    assert la == pytest.approx(lb, rel=1e-10)
    for a, b in zip(wa, wb):
        assert np.allclose(a, b, atol=2e-6)
