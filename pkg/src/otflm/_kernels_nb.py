"""Numba-compiled implementations of the hot numeric kernels.

Same contracts and the same normative feature hash as
:mod:`otflm._kernels_np`; see that module's docstring for the hash
definition. All accumulations run in float64 regardless of the stored
weight dtype, so the float32 model arrays and the float64 copies used
by the gradient checker both compile to correct specializations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_MULT = np.uint64(0x9E3779B97F4A7C15)
_SH32 = np.uint64(32)


@njit(cache=True)
def _mix(h, x):
    h = (h ^ x) * _MULT
    return h ^ (h >> _SH32)


@njit(cache=True)
def feature_index(seed, order_k, words, node_id, mask):
    h = _mix(np.uint64(seed), np.uint64(order_k))
    for i in range(words.shape[0]):
        h = _mix(h, np.uint64(words[i]))
    h = _mix(h, np.uint64(node_id))
    return h & np.uint64(mask)


@njit(cache=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0.0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True)
def advance_hidden(input_row, recurrent, hidden):
    H = recurrent.shape[0]
    out = np.empty(H, dtype=np.float32)
    for i in range(H):
        acc = np.float64(input_row[i])
        for j in range(H):
            acc += np.float64(recurrent[i, j]) * np.float64(hidden[j])
        out[i] = np.float32(_sigmoid(acc))
    return out


@njit(cache=True)
def _node_activation(j, hidden, history, node_vectors, maxent_table,
                     maxent_order, seed, mask):
    H = node_vectors.shape[1]
    a = 0.0
    for i in range(H):
        a += np.float64(node_vectors[j, i]) * np.float64(hidden[i])
    L = history.shape[0]
    kmax = maxent_order if maxent_order < L else L
    for k in range(1, kmax + 1):
        idx = feature_index(seed, k, history[L - k:], j, mask)
        a += np.float64(maxent_table[idx])
    return a


@njit(cache=True)
def word_logprob(hidden, history, nodes, signs, node_vectors, maxent_table,
                 maxent_order, seed, mask):
    lp = 0.0
    for p in range(nodes.shape[0]):
        a = _node_activation(nodes[p], hidden, history, node_vectors,
                             maxent_table, maxent_order, seed, mask)
        lp += _log_sigmoid(np.float64(signs[p]) * a)
    return lp


@njit(cache=True)
def all_word_logprobs(hidden, history, path_nodes, path_signs, path_offsets,
                      node_vectors, maxent_table, maxent_order, seed, mask):
    n_nodes = node_vectors.shape[0]
    acts = np.empty(n_nodes, dtype=np.float64)
    for j in range(n_nodes):
        acts[j] = _node_activation(j, hidden, history, node_vectors,
                                   maxent_table, maxent_order, seed, mask)
    n_words = path_offsets.shape[0] - 1
    out = np.empty(n_words, dtype=np.float64)
    for w in range(n_words):
        lp = 0.0
        for p in range(path_offsets[w], path_offsets[w + 1]):
            lp += _log_sigmoid(np.float64(path_signs[p]) * acts[path_nodes[p]])
        out[w] = lp
    return out


@njit(cache=True)
def sentence_loss(tokens, input_w, recurrent, node_vectors, maxent_table,
                  path_nodes, path_signs, path_offsets, maxent_order, seed, mask):
    H = recurrent.shape[0]
    T = tokens.shape[0]
    h = np.zeros(H, dtype=np.float64)
    z = np.empty(H, dtype=np.float64)
    loss = 0.0
    for t in range(T):
        w = tokens[t]
        hstart = t - maxent_order if t - maxent_order > 0 else 0
        hist = tokens[hstart:t]
        for p in range(path_offsets[w], path_offsets[w + 1]):
            a = _node_activation(path_nodes[p], h, hist, node_vectors,
                                 maxent_table, maxent_order, seed, mask)
            loss -= _log_sigmoid(np.float64(path_signs[p]) * a)
        for i in range(H):
            acc = np.float64(input_w[w, i])
            for j in range(H):
                acc += np.float64(recurrent[i, j]) * h[j]
            z[i] = acc
        for i in range(H):
            h[i] = _sigmoid(z[i])
    return loss


@njit(cache=True)
def sentence_grads(tokens, input_w, recurrent, node_vectors, maxent_table,
                   path_nodes, path_signs, path_offsets, maxent_order, seed, mask,
                   g_input, g_recurrent, g_node, g_maxent):
    H = recurrent.shape[0]
    T = tokens.shape[0]
    states = np.zeros((T + 1, H), dtype=np.float64)
    dh_out = np.zeros((T, H), dtype=np.float64)
    loss = 0.0
    for t in range(T):
        w = tokens[t]
        hstart = t - maxent_order if t - maxent_order > 0 else 0
        hist = tokens[hstart:t]
        L = hist.shape[0]
        for p in range(path_offsets[w], path_offsets[w + 1]):
            j = path_nodes[p]
            a = _node_activation(j, states[t], hist, node_vectors,
                                 maxent_table, maxent_order, seed, mask)
            sgn = np.float64(path_signs[p])
            loss -= _log_sigmoid(sgn * a)
            target = 1.0 if sgn > 0.0 else 0.0
            g = _sigmoid(a) - target
            for i in range(H):
                dh_out[t, i] += g * np.float64(node_vectors[j, i])
                g_node[j, i] += g * states[t, i]
            kmax = maxent_order if maxent_order < L else L
            for k in range(1, kmax + 1):
                idx = feature_index(seed, k, hist[L - k:], j, mask)
                g_maxent[idx] += g
        for i in range(H):
            acc = np.float64(input_w[w, i])
            for j in range(H):
                acc += np.float64(recurrent[i, j]) * states[t, j]
            states[t + 1, i] = _sigmoid(acc)
    delta = np.zeros(H, dtype=np.float64)
    e = np.empty(H, dtype=np.float64)
    for t in range(T - 1, 0, -1):
        for i in range(H):
            acc = dh_out[t, i]
            for j in range(H):
                acc += np.float64(recurrent[j, i]) * delta[j]
            e[i] = acc
        for i in range(H):
            delta[i] = e[i] * states[t, i] * (1.0 - states[t, i])
        prev = tokens[t - 1]
        for i in range(H):
            g_input[prev, i] += delta[i]
            for j in range(H):
                g_recurrent[i, j] += delta[i] * states[t - 1, j]
    return loss


@njit(cache=True)
def train_sentence(tokens, input_w, recurrent, node_vectors, maxent_table,
                   path_nodes, path_signs, path_offsets, maxent_order, seed, mask,
                   lr, bptt_steps):
    H = recurrent.shape[0]
    T = tokens.shape[0]
    states = np.zeros((T + 1, H), dtype=np.float64)
    dh = np.empty(H, dtype=np.float64)
    base = np.empty(H, dtype=np.float64)
    nbuf = bptt_steps if bptt_steps > 0 else 1
    deltas = np.empty((nbuf, H), dtype=np.float64)
    loss = 0.0
    for t in range(T):
        w = tokens[t]
        hstart = t - maxent_order if t - maxent_order > 0 else 0
        hist = tokens[hstart:t]
        L = hist.shape[0]
        for i in range(H):
            dh[i] = 0.0
        o0 = path_offsets[w]
        o1 = path_offsets[w + 1]
        # activations and gradients against the pre-update weights for the
        # whole path (feature cells may collide across path nodes)
        gbuf = np.empty(o1 - o0, dtype=np.float64)
        for p in range(o0, o1):
            j = path_nodes[p]
            a = _node_activation(j, states[t], hist, node_vectors,
                                 maxent_table, maxent_order, seed, mask)
            sgn = np.float64(path_signs[p])
            loss -= _log_sigmoid(sgn * a)
            target = 1.0 if sgn > 0.0 else 0.0
            g = _sigmoid(a) - target
            gbuf[p - o0] = g
            for i in range(H):
                dh[i] += g * np.float64(node_vectors[j, i])
        for p in range(o0, o1):
            j = path_nodes[p]
            glr = lr * gbuf[p - o0]
            for i in range(H):
                node_vectors[j, i] = np.float32(
                    np.float64(node_vectors[j, i]) - glr * states[t, i]
                )
            kmax = maxent_order if maxent_order < L else L
            for k in range(1, kmax + 1):
                idx = feature_index(seed, k, hist[L - k:], j, mask)
                maxent_table[idx] = np.float32(np.float64(maxent_table[idx]) - glr)
        # delta chain against pre-update recurrent weights
        nsteps = bptt_steps if bptt_steps < t else t
        for i in range(H):
            base[i] = dh[i]
        for step in range(nsteps):
            for i in range(H):
                deltas[step, i] = base[i] * states[t - step, i] * (1.0 - states[t - step, i])
            if step + 1 < nsteps:
                for i in range(H):
                    acc = 0.0
                    for j in range(H):
                        acc += np.float64(recurrent[j, i]) * deltas[step, j]
                    base[i] = acc
        for step in range(nsteps):
            src = t - step
            prev = tokens[src - 1]
            for i in range(H):
                d = lr * deltas[step, i]
                input_w[prev, i] = np.float32(np.float64(input_w[prev, i]) - d)
                for j in range(H):
                    recurrent[i, j] = np.float32(
                        np.float64(recurrent[i, j]) - d * states[src - 1, j]
                    )
        for i in range(H):
            acc = np.float64(input_w[w, i])
            for j in range(H):
                acc += np.float64(recurrent[i, j]) * states[t, j]
            states[t + 1, i] = _sigmoid(acc)
    return loss
