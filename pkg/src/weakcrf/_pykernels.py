"""Pure numpy chain kernels.

All kernels take per-position unary scores ``U`` of shape (L, K) and a
transition matrix ``T`` of shape (K+1, K) whose last row scores the move out
of the start state.  Starting the recursion at ``T[K] + U[0]`` is the exact
form of putting all mass on the start state and -inf everywhere else.
"""

import numpy as np


def _lse_cols(M):
    # log-sum-exp over axis 0 of a (K, K) matrix, max-shifted
    m = M.max(axis=0)
    return m + np.log(np.exp(M - m).sum(axis=0))


def chain_logz(U, T):
    L, K = U.shape
    trans = T[:K]
    alpha = T[K] + U[0]
    for l in range(1, L):
        alpha = _lse_cols(alpha[:, None] + trans) + U[l]
    m = alpha.max()
    return float(m + np.log(np.exp(alpha - m).sum()))


def forward_backward(U, T):
    """Return ``(logZ, node_marginals, transition_marginals)``.

    ``transition_marginals[k', k]`` is the expected count of the move
    ``k' -> k`` summed over positions; row K holds the start move.
    """
    U = np.ascontiguousarray(U, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    L, K = U.shape
    trans = T[:K]
    alpha = np.empty((L, K))
    beta = np.empty((L, K))
    alpha[0] = T[K] + U[0]
    for l in range(1, L):
        alpha[l] = _lse_cols(alpha[l - 1][:, None] + trans) + U[l]
    beta[L - 1] = 0.0
    for l in range(L - 2, -1, -1):
        M = trans + (U[l + 1] + beta[l + 1])[None, :]
        m = M.max(axis=1)
        beta[l] = m + np.log(np.exp(M - m[:, None]).sum(axis=1))
    last = alpha[L - 1]
    m = last.max()
    logz = float(m + np.log(np.exp(last - m).sum()))

    node = np.exp(alpha + beta - logz)
    tmarg = np.zeros((K + 1, K))
    tmarg[K] = node[0]
    for l in range(1, L):
        tmarg[:K] += np.exp(alpha[l - 1][:, None] + trans
                            + (U[l] + beta[l])[None, :] - logz)
    return logz, node, tmarg


def viterbi(U, T):
    """Best path and its score; ties go to the lowest label index."""
    U = np.asarray(U, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    L, K = U.shape
    trans = T[:K]
    delta = T[K] + U[0]
    back = np.zeros((L, K), dtype=np.int64)
    for l in range(1, L):
        scores = delta[:, None] + trans
        # argmax returns the first maximum, i.e. the lowest index
        back[l] = scores.argmax(axis=0)
        delta = scores[back[l], np.arange(K)] + U[l]
    path = np.empty(L, dtype=np.int64)
    path[L - 1] = int(delta.argmax())
    for l in range(L - 1, 0, -1):
        path[l - 1] = back[l, path[l]]
    return path, float(delta[path[L - 1]])
