"""On-the-fly neural LM rescoring over word lattices.

The pieces, bottom to top:

* :mod:`otflm.vocab` / :mod:`otflm.huffman` -- corpus vocabulary and the
  frequency-ordered binary tree used by the hierarchical softmax.
* :mod:`otflm.ngram` -- backoff n-gram LM (lattice-side small LM and the
  comparison baseline).
* :mod:`otflm.rnnlm` -- the recurrent LM itself (Elman hidden layer,
  hierarchical softmax output, hashed n-gram direct features).
* :mod:`otflm.context_table` -- bidirectional table compressing a full
  recurrent context into an 8-byte index.
* :mod:`otflm.cache` -- memoization of (context index, word) -> (score,
  successor index) with optional LFU capacity bound.
* :mod:`otflm.codec` -- packed-index wire format for the simulated
  device boundary, with byte accounting.
* :mod:`otflm.lattice` / :mod:`otflm.decoder` -- word lattices and the
  search-side simulator (on-the-fly substitution, n-best, two-pass).
* :mod:`otflm.cli` -- training / decoding / benchmark subcommands.
"""

__version__ = "0.1.0"

from otflm.vocab import Vocabulary, build_vocabulary
from otflm.huffman import HuffmanTree, build_huffman, leaf_path
from otflm.ngram import NgramModel, train_ngram, ngram_logprob, perplexity
from otflm.rnnlm import (
    RnnlmModel,
    RnnlmContext,
    advance_context,
    word_logprob,
    compute_rnnlm,
)
from otflm.context_table import IndexTable
from otflm.cache import RescoreCache, rnnlm_prob, reset_utterance
from otflm.codec import TransferLedger, pack, unpack, reduction_ratio

__all__ = [
    "Vocabulary",
    "build_vocabulary",
    "HuffmanTree",
    "build_huffman",
    "leaf_path",
    "NgramModel",
    "train_ngram",
    "ngram_logprob",
    "perplexity",
    "RnnlmModel",
    "RnnlmContext",
    "advance_context",
    "word_logprob",
    "compute_rnnlm",
    "IndexTable",
    "RescoreCache",
    "rnnlm_prob",
    "reset_utterance",
    "TransferLedger",
    "pack",
    "unpack",
    "reduction_ratio",
]
