"""Recurrent LM with a tree-structured output layer and hashed n-gram features.

Architecture: Elman recurrence ``h' = sigmoid(input_weights[w] +
recurrent_weights @ h)`` over a 4-byte-float hidden layer, an output
layer factored over the frequency-ordered binary tree (one vector per
internal node, probability = product of per-node sigmoid decisions
along the word's path), plus direct hashed n-gram feature weights added
into each node's pre-sigmoid activation.

Scoring protocol: a context holds the hidden state after consuming the
previous word plus the last ``maxent_order`` word ids. Utterances start
from the all-zero hidden state with empty history; the first word is
predicted directly from that state, and the sentence-end token is
predicted (and consumed) like any other word. The sentence-begin token
exists in the vocabulary and the tree but is never fed to the
recurrence.

Model file layout (little-endian), magic first::

    "RNLM"  u32 version=1
    u32 hidden_size   u32 vocab_size   u32 maxent_order
    u64 maxent_size   u64 hash_seed
    f32[vocab_size * hidden_size]       input_weights
    f32[hidden_size * hidden_size]      recurrent_weights
    f32[(vocab_size - 1) * hidden_size] node_vectors
    f32[maxent_size]                    maxent_table
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from otflm import kernels
from otflm.huffman import HuffmanTree
from otflm.vocab import Vocabulary, read_sentences

MODEL_MAGIC = b"RNLM"
MODEL_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during an epoch."""


@dataclass(eq=False)
class RnnlmContext:
    """Immutable scoring context: hidden state + bounded word history.

    ``hidden`` is the float32 state after consuming the most recent
    history word (all zeros at utterance start); ``history`` holds up to
    ``maxent_order`` word ids, most recent last.
    """

    hidden: np.ndarray
    history: tuple[int, ...]

    def __post_init__(self) -> None:
        self.hidden = np.ascontiguousarray(self.hidden, dtype=np.float32)
        self.hidden.flags.writeable = False
        self.history = tuple(int(w) for w in self.history)


@dataclass(eq=False)
class RnnlmModel:
    hidden_size: int
    vocab_size: int
    maxent_order: int
    maxent_size: int
    hash_seed: int
    input_weights: np.ndarray
    recurrent_weights: np.ndarray
    node_vectors: np.ndarray
    maxent_table: np.ndarray

    _hist_dtype: type = field(default=np.int64, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.maxent_size & (self.maxent_size - 1) or self.maxent_size < 1:
            raise ValueError(f"maxent_size must be a power of two, got {self.maxent_size}")
        if self.maxent_order < 1:
            raise ValueError("maxent_order must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        shapes = {
            "input_weights": (self.vocab_size, self.hidden_size),
            "recurrent_weights": (self.hidden_size, self.hidden_size),
            "node_vectors": (self.vocab_size - 1, self.hidden_size),
            "maxent_table": (self.maxent_size,),
        }
        for name, shape in shapes.items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float32)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, arr)

    @classmethod
    def new(cls, vocab_size: int, hidden_size: int = 100, maxent_order: int = 3,
            maxent_table_bits: int = 20, seed: int = 1,
            hash_seed: int = 0x5DEECE66D) -> "RnnlmModel":
        """Fresh model: small uniform input/recurrent weights, zero output
        vectors and feature table (initial distribution is the plain
        product of 0.5 decisions)."""
        rng = np.random.Generator(np.random.PCG64(seed))
        H = hidden_size
        M = 1 << maxent_table_bits
        return cls(
            hidden_size=H,
            vocab_size=vocab_size,
            maxent_order=maxent_order,
            maxent_size=M,
            hash_seed=hash_seed,
            input_weights=rng.uniform(-0.1, 0.1, (vocab_size, H)).astype(np.float32),
            recurrent_weights=rng.uniform(-0.1, 0.1, (H, H)).astype(np.float32),
            node_vectors=np.zeros((vocab_size - 1, H), dtype=np.float32),
            maxent_table=np.zeros(M, dtype=np.float32),
        )

    @property
    def hash_mask(self) -> np.uint64:
        return np.uint64(self.maxent_size - 1)

    def zero_context(self) -> RnnlmContext:
        """Utterance-start context: zero hidden state, empty history."""
        return RnnlmContext(np.zeros(self.hidden_size, dtype=np.float32), ())

    # -- serialization ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = MODEL_MAGIC + struct.pack(
            "<IIIIQQ", MODEL_VERSION, self.hidden_size, self.vocab_size,
            self.maxent_order, self.maxent_size, self.hash_seed,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            for arr in (self.input_weights, self.recurrent_weights,
                        self.node_vectors, self.maxent_table):
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "RnnlmModel":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MODEL_MAGIC:
                raise ValueError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
            version, H, n, order, M, hash_seed = struct.unpack("<IIIIQQ", fh.read(32))
            if version != MODEL_VERSION:
                raise ValueError(f"{path}: unsupported model version {version}")

            def block(count: int, shape) -> np.ndarray:
                raw = fh.read(4 * count)
                if len(raw) != 4 * count:
                    raise ValueError(f"{path}: truncated weight block")
                return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)

            return cls(
                hidden_size=H, vocab_size=n, maxent_order=order,
                maxent_size=M, hash_seed=hash_seed,
                input_weights=block(n * H, (n, H)),
                recurrent_weights=block(H * H, (H, H)),
                node_vectors=block((n - 1) * H, (n - 1, H)),
                maxent_table=block(M, (M,)),
            )


def _check_word(model: RnnlmModel, w: int) -> int:
    w = int(w)
    if not 0 <= w < model.vocab_size:
        raise ValueError(f"word id {w} out of range 0..{model.vocab_size - 1}")
    return w


def advance_context(model: RnnlmModel, ctx: RnnlmContext, w: int) -> RnnlmContext:
    """Consume word *w*: new hidden state plus history shifted by one
    (oldest word dropped once the bound is reached)."""
    w = _check_word(model, w)
    hidden = kernels.advance_hidden(
        model.input_weights[w], model.recurrent_weights, ctx.hidden
    )
    history = (ctx.history + (w,))[-model.maxent_order:]
    return RnnlmContext(hidden, history)


def _history_array(model: RnnlmModel, ctx: RnnlmContext) -> np.ndarray:
    return np.asarray(ctx.history, dtype=np.int64)


def word_logprob(model: RnnlmModel, tree: HuffmanTree, ctx: RnnlmContext, w: int) -> float:
    """ln P(w | ctx); cost is one sigmoid per node on the word's path."""
    w = _check_word(model, w)
    o0, o1 = tree.path_offsets[w], tree.path_offsets[w + 1]
    return float(kernels.word_logprob(
        ctx.hidden, _history_array(model, ctx),
        tree.path_nodes[o0:o1], tree.path_signs[o0:o1],
        model.node_vectors, model.maxent_table,
        model.maxent_order, np.uint64(model.hash_seed), model.hash_mask,
    ))


def all_word_logprobs(model: RnnlmModel, tree: HuffmanTree, ctx: RnnlmContext) -> np.ndarray:
    """ln P(w | ctx) for every vocabulary word (exhaustive enumeration)."""
    return kernels.all_word_logprobs(
        ctx.hidden, _history_array(model, ctx),
        tree.path_nodes, tree.path_signs, tree.path_offsets,
        model.node_vectors, model.maxent_table,
        model.maxent_order, np.uint64(model.hash_seed), model.hash_mask,
    )


def compute_rnnlm(model: RnnlmModel, tree: HuffmanTree, ctx: RnnlmContext,
                  w: int) -> tuple[float, RnnlmContext]:
    """Score *w* against *ctx* and return the advanced context as well."""
    p = word_logprob(model, tree, ctx, w)
    return p, advance_context(model, ctx, w)


def _sentence_tokens(sentence: Sequence[int], eos_id: int) -> np.ndarray:
    return np.asarray(list(sentence) + [eos_id], dtype=np.int64)


def train(model: RnnlmModel, corpus, vocab: Vocabulary, tree: HuffmanTree,
          epochs: int, learn_rate: float, bptt_steps: int = 1,
          valid_sentences: Sequence[Sequence[int]] | None = None):
    """Online SGD over the corpus; returns (model, per-epoch log).

    Each log entry is ``(epoch, train_ppl, valid_ppl)`` with valid_ppl
    None when no validation set is given. Sentences are visited in
    corpus order, hidden state reset to zero at each sentence start.
    Raises :class:`TrainingDivergedError` when the loss goes non-finite.
    """
    if learn_rate < 0:
        raise ValueError("learn_rate must be >= 0")
    if bptt_steps < 1:
        raise ValueError("bptt_steps must be >= 1")
    if tree.n_words != model.vocab_size:
        raise ValueError("tree size does not match model vocabulary")
    sentences = read_sentences(corpus, vocab) if not _is_tokenized(corpus) else list(corpus)
    if not sentences:
        raise ValueError("training corpus is empty")
    eos = vocab.sentence_end_id
    seed = np.uint64(model.hash_seed)
    mask = model.hash_mask
    log = []
    for epoch in range(1, epochs + 1):
        total_loss = 0.0
        total_tokens = 0
        for sent in sentences:
            tokens = _sentence_tokens(sent, eos)
            loss = kernels.train_sentence(
                tokens, model.input_weights, model.recurrent_weights,
                model.node_vectors, model.maxent_table,
                tree.path_nodes, tree.path_signs, tree.path_offsets,
                model.maxent_order, seed, mask,
                float(learn_rate), int(bptt_steps),
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss in epoch {epoch}")
            total_loss += loss
            total_tokens += len(tokens)
        avg = total_loss / total_tokens
        train_ppl = math.exp(avg) if avg < 700.0 else math.inf
        valid_ppl = (rnnlm_perplexity(model, tree, valid_sentences)
                     if valid_sentences else None)
        log.append((epoch, train_ppl, valid_ppl))
    return model, log


def _is_tokenized(corpus) -> bool:
    if isinstance(corpus, list) and corpus and isinstance(corpus[0], (list, np.ndarray)):
        return True
    return False


def rnnlm_perplexity(model: RnnlmModel, tree: HuffmanTree,
                     sentences: Iterable[Sequence[int]],
                     eos_id: int | None = None) -> float:
    """exp of mean negative log-probability, sentence-end included.

    Threads contexts through :func:`advance_context` from the zero
    context, exactly composing :func:`word_logprob` calls. ``eos_id``
    defaults to the conventional id 2 assigned by the vocabulary
    builder.
    """
    eos = 2 if eos_id is None else int(eos_id)
    total = 0.0
    count = 0
    for sent in sentences:
        ctx = model.zero_context()
        for w in list(sent) + [eos]:
            total -= word_logprob(model, tree, ctx, w)
            ctx = advance_context(model, ctx, w)
            count += 1
    if count == 0:
        raise ValueError("no tokens to evaluate")
    return math.exp(total / count)


# -- float64 views for the gradient checker ------------------------------

def weights_f64(model: RnnlmModel):
    """Float64 copies of the four weight classes, in kernel argument order."""
    return (
        model.input_weights.astype(np.float64),
        model.recurrent_weights.astype(np.float64),
        model.node_vectors.astype(np.float64),
        model.maxent_table.astype(np.float64),
    )


def sentence_loss_raw(weights, tree: HuffmanTree, tokens: np.ndarray,
                      maxent_order: int, hash_seed: int, hash_mask) -> float:
    """Loss of one token sequence as a pure function of the weight arrays."""
    inp, rec, nod, mx = weights
    return float(kernels.sentence_loss(
        np.asarray(tokens, dtype=np.int64), inp, rec, nod, mx,
        tree.path_nodes, tree.path_signs, tree.path_offsets,
        maxent_order, np.uint64(hash_seed), np.uint64(hash_mask),
    ))


def sentence_grads_raw(weights, tree: HuffmanTree, tokens: np.ndarray,
                       maxent_order: int, hash_seed: int, hash_mask):
    """Full-backpropagation gradients of :func:`sentence_loss_raw`.

    Returns (loss, (g_input, g_recurrent, g_node, g_maxent)).
    """
    inp, rec, nod, mx = weights
    grads = (
        np.zeros_like(inp, dtype=np.float64),
        np.zeros_like(rec, dtype=np.float64),
        np.zeros_like(nod, dtype=np.float64),
        np.zeros_like(mx, dtype=np.float64),
    )
    loss = float(kernels.sentence_grads(
        np.asarray(tokens, dtype=np.int64), inp, rec, nod, mx,
        tree.path_nodes, tree.path_signs, tree.path_offsets,
        maxent_order, np.uint64(hash_seed), np.uint64(hash_mask),
        *grads,
    ))
    return loss, grads
