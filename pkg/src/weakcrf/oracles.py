"""Exhaustive-enumeration references for the chain computations.

Everything here is exponential in the sentence size and shares no code with
the dynamic programs it checks: every truth path (and, for the free term,
every labeling of the observed weak cells) is materialized and scored.
"""

import itertools
import math

import numpy as np

from .labels import MISSING


def enum_score(E, T, Pi, truth, weak):
    """Left-to-right term-by-term joint score of one configuration."""
    K = len(E[0])
    prev, s = K, 0.0
    for l, t in enumerate(truth):
        s = s + T[prev][t] + E[l][t]
        for j, y in enumerate(weak[l]):
            if y != MISSING:
                s = s + Pi[j][t][y]
        prev = t
    return s


def all_sequences(K, L):
    return np.array(list(itertools.product(range(K), repeat=L)), dtype=np.int64).reshape(K ** L, L)


def path_scores(E, T, paths):
    """Emission + transition score of every row of ``paths``, summed left to right."""
    E = np.asarray(E, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    K = E.shape[1]
    s = np.zeros(len(paths))
    prev = np.full(len(paths), K)
    for l in range(paths.shape[1]):
        t = paths[:, l]
        s = s + T[prev, t] + E[l, t]
        prev = t
    return s


def _logsumexp(a):
    a = np.ravel(a)
    m = a.max()
    return float(m + math.log(np.exp(a - m).sum()))


def _cells(weak):
    weak = np.asarray(weak)
    ls, js = np.nonzero(weak != MISSING)
    return ls, js, weak[ls, js]


def brute_clamped(E, T, Pi, weak):
    L, K = np.shape(E)
    Pi = np.asarray(Pi, dtype=np.float64)
    paths = all_sequences(K, L)
    s = path_scores(E, T, paths)
    for l, j, y in zip(*_cells(weak)):
        s = s + Pi[j, paths[:, l], y]
    return _logsumexp(s)


def free_configurations(K, L, n_observed):
    return K ** (L + n_observed)


def brute_free(E, T, Pi, weak):
    L, K = np.shape(E)
    Pi = np.asarray(Pi, dtype=np.float64)
    ls, js, _ = _cells(weak)
    paths = all_sequences(K, L)
    fills = all_sequences(K, len(ls))
    total = path_scores(E, T, paths)[:, None] + np.zeros((1, len(fills)))
    for c, (l, j) in enumerate(zip(ls, js)):
        total = total + Pi[j][paths[:, l]][:, fills[:, c]]
    return _logsumexp(total)


def brute_viterbi(E, T):
    """Best path by enumeration.

    Lowest-index backpointers select, among all maximal paths, the smallest
    one when compared from the last token backwards.
    """
    L, K = np.shape(E)
    paths = all_sequences(K, L)
    s = path_scores(E, T, paths)
    best = s.max()
    ties = paths[s == best]
    # lexsort's primary key is the last row, i.e. the last token
    return ties[np.lexsort(ties.T)[0]].copy(), float(best)


def central_difference(f, x, step=1e-5):
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = f(x)
        x[idx] = orig - step
        lo = f(x)
        x[idx] = orig
        g[idx] = (hi - lo) / (2 * step)
    return g


def gradient_mismatch(analytic, numeric, rtol=1e-4, atol=1e-7):
    """Largest relative error among entries whose absolute error exceeds ``atol``.

    Returns 0.0 when every entry is within ``atol``.
    """
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    diff = np.abs(a - n)
    bad = diff > atol
    if not bad.any():
        return 0.0
    return float((diff[bad] / np.maximum(np.abs(a[bad]), np.abs(n[bad]))).max())


def random_instance(rng, L, K, J, scale=2.0, missing=None):
    """Uniform [-scale, scale] parameters and a random weak grid.

    ``missing`` is the per-cell abstention probability; by default it is
    itself drawn uniformly from [0, 0.8].
    """
    E = rng.uniform(-scale, scale, (L, K))
    T = rng.uniform(-scale, scale, (K + 1, K))
    Pi = rng.uniform(-scale, scale, (J, K, K))
    weak = rng.integers(0, K, (L, J))
    p = rng.uniform(0.0, 0.8) if missing is None else missing
    weak[rng.random((L, J)) < p] = MISSING
    return E, T, Pi, weak
