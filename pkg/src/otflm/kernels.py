"""Backend selection for the numeric kernels.

The numba backend is used when available; set ``OTFLM_DISABLE_NUMBA=1``
to force the pure-numpy fallback (handy for debugging and for the
backend comparison benchmark under ``benchmarks/``). The active choice
is exposed as ``BACKEND``.
"""

from __future__ import annotations

import os

_flag = os.environ.get("OTFLM_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in {"1", "true", "yes", "on"}

if NUMBA_DISABLED:
    from otflm import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from otflm import _kernels_nb as _impl

        BACKEND = "numba"
    except ImportError:
        from otflm import _kernels_np as _impl

        BACKEND = "numpy"

feature_index = _impl.feature_index
advance_hidden = _impl.advance_hidden
word_logprob = _impl.word_logprob
all_word_logprobs = _impl.all_word_logprobs
sentence_loss = _impl.sentence_loss
sentence_grads = _impl.sentence_grads
train_sentence = _impl.train_sentence

__all__ = [
    "BACKEND",
    "NUMBA_DISABLED",
    "feature_index",
    "advance_hidden",
    "word_logprob",
    "all_word_logprobs",
    "sentence_loss",
    "sentence_grads",
    "train_sentence",
]
