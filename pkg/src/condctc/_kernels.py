"""Hot dynamic-programming kernels over the extended CTC state topology.

All kernels take a (T, K) matrix of per-frame log-probabilities and the
blank-interleaved extended target ``ext`` = [blank, y1, blank, ..., yL, blank]
(S = 2L + 1 states, blank fixed at index 0). They are compiled with numba
unless the numpy fallback backend is selected (see ``condctc._backend``).
"""

from __future__ import annotations

import numpy as np

from condctc._backend import njit

NEG_INF = -np.inf


@njit(cache=True)
def _lse2(a: float, b: float) -> float:
    # log(exp(a) + exp(b)) without overflow; handles -inf operands
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + np.log1p(np.exp(b - a))


@njit(cache=True)
def _forward_table(logp, ext):
    T = logp.shape[0]
    S = ext.shape[0]
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = _lse2(acc, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != 0 and ext[s] != ext[s - 2]:
                acc = _lse2(acc, alpha[t - 1, s - 2])
            alpha[t, s] = acc + logp[t, ext[s]]
    return alpha


@njit(cache=True)
def forward_log_prob(logp, ext):
    """Log of the total probability of all paths collapsing to the target."""
    T = logp.shape[0]
    S = ext.shape[0]
    alpha = _forward_table(logp, ext)
    total = alpha[T - 1, S - 1]
    if S > 1:
        total = _lse2(total, alpha[T - 1, S - 2])
    return total


@njit(cache=True)
def loss_grad_coeff(logp, ext):
    """Forward-backward pass: returns (log_prob, G).

    G[t, k] is (1/p) * dp/dz[t, k], accumulated from path masses that pass
    through label k at frame t with the frame's own emission factored out,
    so it stays finite even where z[t, k] = 0. The probability-space loss
    gradient is -G; the logit-space gradient is z * (1 - G).
    """
    T, K = logp.shape
    S = ext.shape[0]
    grad_coeff = np.zeros((T, K))

    alpha = _forward_table(logp, ext)
    log_p = alpha[T - 1, S - 1]
    if S > 1:
        log_p = _lse2(log_p, alpha[T - 1, S - 2])
    if log_p == NEG_INF:
        return NEG_INF, grad_coeff

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = logp[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = logp[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(S - 1, -1, -1):
            acc = beta[t + 1, s]
            if s + 1 < S:
                acc = _lse2(acc, beta[t + 1, s + 1])
            if s + 2 < S and ext[s + 2] != 0 and ext[s + 2] != ext[s]:
                acc = _lse2(acc, beta[t + 1, s + 2])
            beta[t, s] = acc + logp[t, ext[s]]

    for t in range(T):
        for s in range(S):
            if t == 0:
                a_in = 0.0 if s <= 1 else NEG_INF
            else:
                a_in = alpha[t - 1, s]
                if s >= 1:
                    a_in = _lse2(a_in, alpha[t - 1, s - 1])
                if s >= 2 and ext[s] != 0 and ext[s] != ext[s - 2]:
                    a_in = _lse2(a_in, alpha[t - 1, s - 2])
            if t == T - 1:
                b_out = 0.0 if s >= S - 2 else NEG_INF
            else:
                b_out = beta[t + 1, s]
                if s + 1 < S:
                    b_out = _lse2(b_out, beta[t + 1, s + 1])
                if s + 2 < S and ext[s + 2] != 0 and ext[s + 2] != ext[s]:
                    b_out = _lse2(b_out, beta[t + 1, s + 2])
            if a_in > NEG_INF and b_out > NEG_INF:
                grad_coeff[t, ext[s]] += np.exp(a_in + b_out - log_p)

    return log_p, grad_coeff


@njit(cache=True)
def viterbi_states(logp, ext):
    """Most probable state path through the extended target topology.

    Returns (log_prob, states). Ties resolve to the lexicographically
    smallest emitted label sequence: the trace walks forward over a
    suffix-score table, preferring the smallest next label among the
    score-optimal successors. states is all -1 when the target is
    infeasible within T frames.
    """
    T = logp.shape[0]
    S = ext.shape[0]
    states = np.full(T, -1, dtype=np.int64)

    # w[t, s]: best log-score of completing the path from state s at frame t,
    # emission at frame t included.
    w = np.full((T, S), NEG_INF)
    w[T - 1, S - 1] = logp[T - 1, ext[S - 1]]
    if S > 1:
        w[T - 1, S - 2] = logp[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(S):
            best = w[t + 1, s]
            if s + 1 < S and w[t + 1, s + 1] > best:
                best = w[t + 1, s + 1]
            if (
                s + 2 < S
                and ext[s + 2] != 0
                and ext[s + 2] != ext[s]
                and w[t + 1, s + 2] > best
            ):
                best = w[t + 1, s + 2]
            w[t, s] = best + logp[t, ext[s]]

    s = 0
    total = w[0, 0]
    if S > 1 and w[0, 1] > total:  # tie keeps the blank start (smaller label)
        total = w[0, 1]
        s = 1
    if total == NEG_INF:
        return NEG_INF, states

    states[0] = s
    for t in range(T - 1):
        best = NEG_INF
        nxt = -1
        best_label = -1
        for d in range(3):
            c = s + d
            if c >= S:
                continue
            if d == 2 and (ext[c] == 0 or ext[c] == ext[s]):
                continue
            val = w[t + 1, c]
            if val == NEG_INF:
                continue
            if nxt < 0 or val > best or (val == best and ext[c] < best_label):
                best = val
                nxt = c
                best_label = ext[c]
        s = nxt
        states[t + 1] = s
    return total, states
