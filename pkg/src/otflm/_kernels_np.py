"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback backend, selected when numba is unavailable or
``OTFLM_DISABLE_NUMBA`` is set (see :mod:`otflm.kernels`). Semantics
match the numba backend: stored weights and hidden vectors are 4-byte
floats, every accumulation runs in 8-byte floats, and the feature hash
is the normative chain below.

Feature hash (normative, shared with the numba backend and therefore
part of the model file contract)::

    mix(h, x) = t ^ (t >> 32)   where t = ((h ^ x) * MULT) mod 2**64
    index(seed, k, w_1..w_k, node) =
        mix(...mix(mix(mix(seed, k), w_1)..., w_k), node) & (table_size - 1)

with MULT = 0x9E3779B97F4A7C15. Orders run 1..maxent_order over the
most recent history words, so each order-k feature hashes exactly the
last k words plus the output-tree node id.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
_MULT = 0x9E3779B97F4A7C15


def _mix_int(h: int, x: int) -> int:
    h = ((h ^ x) * _MULT) & _M64
    return h ^ (h >> 32)


def _prefix(seed, order_k, words) -> int:
    h = _mix_int(int(seed), int(order_k))
    for w in words:
        h = _mix_int(h, int(w))
    return h


def feature_index(seed, order_k, words, node_id, mask) -> int:
    """Hash one (order, context words, node) feature to a table slot."""
    return _mix_int(_prefix(seed, order_k, words), int(node_id)) & int(mask)


def _node_feature_indices(seed, order_k, words, nodes_u64, mask):
    # vectorized tail of the hash chain over an array of node ids
    pre = np.uint64(_prefix(seed, order_k, words))
    h = (pre ^ nodes_u64) * np.uint64(_MULT)
    h ^= h >> np.uint64(32)
    return h & np.uint64(mask)


def _maxent_for_nodes(history, nodes, maxent_table, maxent_order, seed, mask):
    out = np.zeros(len(nodes), dtype=np.float64)
    L = len(history)
    if L == 0 or maxent_order == 0:
        return out
    nodes_u64 = nodes.astype(np.uint64)
    for k in range(1, min(L, maxent_order) + 1):
        idx = _node_feature_indices(seed, k, history[L - k:], nodes_u64, mask)
        out += maxent_table[idx].astype(np.float64)
    return out


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_sigmoid(s):
    return np.minimum(s, 0.0) - np.log1p(np.exp(-np.abs(s)))


def advance_hidden(input_row, recurrent, hidden):
    """sigmoid(input_row + recurrent @ hidden), accumulated in float64."""
    z = np.asarray(input_row, dtype=np.float64) + np.asarray(
        recurrent, dtype=np.float64
    ) @ np.asarray(hidden, dtype=np.float64)
    return _sigmoid(z).astype(np.float32)


def word_logprob(hidden, history, nodes, signs, node_vectors, maxent_table,
                 maxent_order, seed, mask):
    """Sum of per-node log-sigmoid terms along one output-tree path."""
    acts = np.asarray(node_vectors[nodes], dtype=np.float64) @ np.asarray(
        hidden, dtype=np.float64
    )
    acts += _maxent_for_nodes(history, nodes, maxent_table, maxent_order, seed, mask)
    s = np.asarray(signs, dtype=np.float64) * acts
    return float(np.sum(_log_sigmoid(s)))


def all_word_logprobs(hidden, history, path_nodes, path_signs, path_offsets,
                      node_vectors, maxent_table, maxent_order, seed, mask):
    """Log-probability of every word for one context; used for exhaustive
    normalization checks and batch scoring."""
    acts = np.asarray(node_vectors, dtype=np.float64) @ np.asarray(
        hidden, dtype=np.float64
    )
    all_nodes = np.arange(node_vectors.shape[0], dtype=np.int64)
    acts += _maxent_for_nodes(history, all_nodes, maxent_table, maxent_order, seed, mask)
    s = np.asarray(path_signs, dtype=np.float64) * acts[path_nodes]
    logsig = _log_sigmoid(s)
    return np.add.reduceat(logsig, path_offsets[:-1])


def sentence_loss(tokens, input_w, recurrent, node_vectors, maxent_table,
                  path_nodes, path_signs, path_offsets, maxent_order, seed, mask):
    """Total negative log-likelihood of a token sequence.

    Pure function of the weights: the hidden chain starts at zero and
    stays in float64, so the value is smooth enough for finite
    differences when the weights are float64.
    """
    H = recurrent.shape[0]
    U = np.asarray(input_w, dtype=np.float64)
    W = np.asarray(recurrent, dtype=np.float64)
    V = np.asarray(node_vectors, dtype=np.float64)
    h = np.zeros(H, dtype=np.float64)
    loss = 0.0
    T = len(tokens)
    for t in range(T):
        w = int(tokens[t])
        hist = tokens[max(0, t - maxent_order):t]
        o0, o1 = path_offsets[w], path_offsets[w + 1]
        nodes = path_nodes[o0:o1]
        acts = V[nodes] @ h
        acts += _maxent_for_nodes(hist, nodes, maxent_table, maxent_order, seed, mask)
        s = np.asarray(path_signs[o0:o1], dtype=np.float64) * acts
        loss -= float(np.sum(_log_sigmoid(s)))
        h = _sigmoid(U[w] + W @ h)
    return loss


def sentence_grads(tokens, input_w, recurrent, node_vectors, maxent_table,
                   path_nodes, path_signs, path_offsets, maxent_order, seed, mask,
                   g_input, g_recurrent, g_node, g_maxent):
    """Full-backpropagation gradient of :func:`sentence_loss`.

    Gradients accumulate into the ``g_*`` float64 arrays; returns the loss.
    """
    H = recurrent.shape[0]
    T = len(tokens)
    U = np.asarray(input_w, dtype=np.float64)
    W = np.asarray(recurrent, dtype=np.float64)
    V = np.asarray(node_vectors, dtype=np.float64)
    states = np.zeros((T + 1, H), dtype=np.float64)
    dh_out = np.zeros((T, H), dtype=np.float64)
    loss = 0.0
    for t in range(T):
        w = int(tokens[t])
        hist = tokens[max(0, t - maxent_order):t]
        L = len(hist)
        h = states[t]
        o0, o1 = path_offsets[w], path_offsets[w + 1]
        nodes = path_nodes[o0:o1]
        signs = np.asarray(path_signs[o0:o1], dtype=np.float64)
        acts = V[nodes] @ h
        acts += _maxent_for_nodes(hist, nodes, maxent_table, maxent_order, seed, mask)
        loss -= float(np.sum(_log_sigmoid(signs * acts)))
        g = _sigmoid(acts) - (signs > 0)
        dh_out[t] = g @ V[nodes]
        g_node[nodes] += g[:, None] * h[None, :]
        if L and maxent_order:
            for k in range(1, min(L, maxent_order) + 1):
                idx = _node_feature_indices(
                    seed, k, hist[L - k:], nodes.astype(np.uint64), mask
                ).astype(np.int64)
                np.add.at(g_maxent, idx, g)
        states[t + 1] = _sigmoid(U[w] + W @ h)
    delta = np.zeros(H, dtype=np.float64)
    for t in range(T - 1, 0, -1):
        e = dh_out[t] + W.T @ delta
        ht = states[t]
        delta = e * ht * (1.0 - ht)
        g_recurrent += np.outer(delta, states[t - 1])
        g_input[int(tokens[t - 1])] += delta
    return loss


def train_sentence(tokens, input_w, recurrent, node_vectors, maxent_table,
                   path_nodes, path_signs, path_offsets, maxent_order, seed, mask,
                   lr, bptt_steps):
    """One online SGD pass over a sentence; updates weights in place.

    Per token: output-layer and feature-table updates from the current
    state, then truncated backpropagation through up to ``bptt_steps``
    recurrent hops (delta chain computed against the pre-update
    recurrent matrix), then the state advance with the updated weights.
    Returns the total negative log-likelihood measured pre-update.
    """
    H = recurrent.shape[0]
    T = len(tokens)
    states = np.zeros((T + 1, H), dtype=np.float64)
    loss = 0.0
    for t in range(T):
        w = int(tokens[t])
        hist = tokens[max(0, t - maxent_order):t]
        L = len(hist)
        h = states[t]
        o0, o1 = path_offsets[w], path_offsets[w + 1]
        nodes = path_nodes[o0:o1]
        signs = np.asarray(path_signs[o0:o1], dtype=np.float64)
        V_rows = np.asarray(node_vectors[nodes], dtype=np.float64)
        acts = V_rows @ h
        acts += _maxent_for_nodes(hist, nodes, maxent_table, maxent_order, seed, mask)
        loss -= float(np.sum(_log_sigmoid(signs * acts)))
        g = _sigmoid(acts) - (signs > 0)
        dh = g @ V_rows
        node_vectors[nodes] -= (lr * g)[:, None] * h[None, :]
        if L and maxent_order:
            for k in range(1, min(L, maxent_order) + 1):
                idx = _node_feature_indices(
                    seed, k, hist[L - k:], nodes.astype(np.uint64), mask
                ).astype(np.int64)
                np.subtract.at(maxent_table, idx, lr * g)
        # delta chain against pre-update recurrent weights
        nsteps = min(bptt_steps, t)
        if nsteps > 0:
            W64 = np.asarray(recurrent, dtype=np.float64)
            deltas = np.empty((nsteps, H), dtype=np.float64)
            base = dh
            for step in range(nsteps):
                src = states[t - step]
                deltas[step] = base * src * (1.0 - src)
                base = W64.T @ deltas[step]
            for step in range(nsteps):
                src = t - step
                recurrent -= lr * np.outer(deltas[step], states[src - 1])
                input_w[int(tokens[src - 1])] -= lr * deltas[step]
        z = np.asarray(input_w[w], dtype=np.float64) + np.asarray(
            recurrent, dtype=np.float64
        ) @ h
        states[t + 1] = _sigmoid(z)
    return loss
