#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the four hot paths (state advance, single-word scoring, full
vocabulary enumeration, one training sentence) on a realistically sized
model. The numba side includes a warm-up call so JIT compilation is not
timed. Run:

    python3 benchmarks/kernel_speed.py [--hidden 100] [--vocab 20000]
"""

import argparse
import time

import numpy as np

from otflm import _kernels_np as knp
from otflm.huffman import build_huffman
from otflm.rnnlm import RnnlmModel
from otflm.synth import zipfian_corpus
from otflm.vocab import build_vocabulary

try:
    from otflm import _kernels_nb as knb
except ImportError:
    knb = None


def build_fixture(hidden: int, vocab_size: int):
    lines = zipfian_corpus(max(2000, vocab_size // 2), vocab_size, seed=1)
    vocab = build_vocabulary(lines)
    tree = build_huffman(vocab)
    model = RnnlmModel.new(vocab.size, hidden_size=hidden, maxent_order=3,
                           maxent_table_bits=20, seed=2)
    rng = np.random.RandomState(3)
    model.node_vectors[:] = rng.uniform(-0.3, 0.3, model.node_vectors.shape).astype(np.float32)
    model.maxent_table[:] = rng.uniform(-0.1, 0.1, model.maxent_size).astype(np.float32)
    return vocab, tree, model


def timeit(fn, repeats: int) -> float:
    fn()  # warm-up (JIT compile / cache touch)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_backend(name, k, vocab, tree, model, tokens):
    rng = np.random.RandomState(4)
    hidden = rng.uniform(0, 1, model.hidden_size).astype(np.float32)
    hist = rng.randint(0, vocab.size, size=3).astype(np.int64)
    w = int(rng.randint(0, vocab.size))
    o0, o1 = tree.path_offsets[w], tree.path_offsets[w + 1]
    args = (model.maxent_order, np.uint64(model.hash_seed), model.hash_mask)

    results = {}
    results["advance_hidden"] = timeit(
        lambda: k.advance_hidden(model.input_weights[w], model.recurrent_weights,
                                 hidden), 2000)
    results["word_logprob"] = timeit(
        lambda: k.word_logprob(hidden, hist, tree.path_nodes[o0:o1],
                               tree.path_signs[o0:o1], model.node_vectors,
                               model.maxent_table, *args), 2000)
    results["all_word_logprobs"] = timeit(
        lambda: k.all_word_logprobs(hidden, hist, tree.path_nodes,
                                    tree.path_signs, tree.path_offsets,
                                    model.node_vectors, model.maxent_table,
                                    *args), 20)
    weights = tuple(getattr(model, n).copy() for n in
                    ("input_weights", "recurrent_weights", "node_vectors",
                     "maxent_table"))
    results["train_sentence"] = timeit(
        lambda: k.train_sentence(tokens, *weights, tree.path_nodes,
                                 tree.path_signs, tree.path_offsets,
                                 *args, 0.1, 2), 50)
    print(f"\n{name}")
    for op, sec in results.items():
        print(f"  {op:<20} {sec * 1e6:10.1f} us")
    return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--hidden", type=int, default=100)
    parser.add_argument("--vocab", type=int, default=20000)
    args = parser.parse_args()

    vocab, tree, model = build_fixture(args.hidden, args.vocab)
    rng = np.random.RandomState(5)
    tokens = rng.randint(0, vocab.size, size=20).astype(np.int64)
    print(f"vocab={vocab.size} hidden={model.hidden_size} "
          f"maxent_table={model.maxent_size} order={model.maxent_order}")

    np_res = bench_backend("numpy fallback", knp, vocab, tree, model, tokens)
    if knb is None:
        print("\nnumba not available; fallback only")
        return
    nb_res = bench_backend("numba", knb, vocab, tree, model, tokens)
    print("\nspeedup (numpy / numba)")
    for op in np_res:
        print(f"  {op:<20} {np_res[op] / nb_res[op]:10.1f}x")


if __name__ == "__main__":
    main()
