# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse_col(const double[::1] prev, const double[:, ::1] T,
                            Py_ssize_t k, Py_ssize_t K) noexcept nogil:
    cdef double m = -INFINITY, s = 0.0, v
    cdef Py_ssize_t kp
    for kp in range(K):
        v = prev[kp] + T[kp, k]
        if v > m:
            m = v
    if m == -INFINITY:
        return m
    for kp in range(K):
        s += exp(prev[kp] + T[kp, k] - m)
    return m + log(s)


cdef void _forward(const double[:, ::1] U, const double[:, ::1] T,
                   double[:, ::1] alpha) noexcept nogil:
    cdef Py_ssize_t L = U.shape[0], K = U.shape[1], l, k
    for k in range(K):
        alpha[0, k] = T[K, k] + U[0, k]
    for l in range(1, L):
        for k in range(K):
            alpha[l, k] = _lse_col(alpha[l - 1], T, k, K) + U[l, k]


cdef double _lse_vec(const double[::1] v, Py_ssize_t K) noexcept nogil:
    cdef double m = -INFINITY, s = 0.0
    cdef Py_ssize_t k
    for k in range(K):
        if v[k] > m:
            m = v[k]
    if m == -INFINITY:
        return m
    for k in range(K):
        s += exp(v[k] - m)
    return m + log(s)


def chain_logz(U, T):
    cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t L = Uv.shape[0], K = Uv.shape[1]
    alpha = np.empty((L, K))
    cdef double[:, ::1] av = alpha
    cdef double out
    with nogil:
        _forward(Uv, Tv, av)
        out = _lse_vec(av[L - 1], K)
    return out


def forward_backward(U, T):
    cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t L = Uv.shape[0], K = Uv.shape[1], l, k, kp
    alpha_a = np.empty((L, K))
    beta_a = np.empty((L, K))
    node_a = np.empty((L, K))
    tmarg_a = np.zeros((K + 1, K))
    cdef double[:, ::1] alpha = alpha_a, beta = beta_a, node = node_a, tmarg = tmarg_a
    cdef double logz, m, s, v
    with nogil:
        _forward(Uv, Tv, alpha)
        for k in range(K):
            beta[L - 1, k] = 0.0
        for l in range(L - 2, -1, -1):
            for k in range(K):
                m = -INFINITY
                for kp in range(K):
                    v = Tv[k, kp] + Uv[l + 1, kp] + beta[l + 1, kp]
                    if v > m:
                        m = v
                s = 0.0
                for kp in range(K):
                    s += exp(Tv[k, kp] + Uv[l + 1, kp] + beta[l + 1, kp] - m)
                beta[l, k] = m + log(s)
        logz = _lse_vec(alpha[L - 1], K)
        for l in range(L):
            for k in range(K):
                node[l, k] = exp(alpha[l, k] + beta[l, k] - logz)
        for k in range(K):
            tmarg[K, k] = node[0, k]
        for l in range(1, L):
            for kp in range(K):
                for k in range(K):
                    tmarg[kp, k] += exp(alpha[l - 1, kp] + Tv[kp, k]
                                        + Uv[l, k] + beta[l, k] - logz)
    return logz, node_a, tmarg_a


def viterbi(U, T):
    cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t L = Uv.shape[0], K = Uv.shape[1], l, k, kp, best_k
    delta_a = np.empty((L, K))
    back_a = np.zeros((L, K), dtype=np.int64)
    path_a = np.empty(L, dtype=np.int64)
    cdef double[:, ::1] delta = delta_a
    cdef cnp.int64_t[:, ::1] back = back_a
    cdef cnp.int64_t[::1] path = path_a
    cdef double best, v
    with nogil:
        for k in range(K):
            delta[0, k] = Tv[K, k] + Uv[0, k]
        for l in range(1, L):
            for k in range(K):
                best = delta[l - 1, 0] + Tv[0, k]
                best_k = 0
                for kp in range(1, K):
                    v = delta[l - 1, kp] + Tv[kp, k]
                    if v > best:
                        best = v
                        best_k = kp
                back[l, k] = best_k
                delta[l, k] = best + Uv[l, k]
        best = delta[L - 1, 0]
        best_k = 0
        for k in range(1, K):
            if delta[L - 1, k] > best:
                best = delta[L - 1, k]
                best_k = k
        path[L - 1] = best_k
        for l in range(L - 1, 0, -1):
            path[l - 1] = back[l, path[l]]
    return path_a, best
