"""Latent-truth linear-chain CRF: scores, likelihood, gradients, decoding.

Shapes used throughout::

    E   (L, K)      emission scores
    T   (K+1, K)    transition scores, row K = start state
    Pi  (J, K, K)   per-source scores, Pi[j, truth, weak_label]
    weak (L, J)     observed weak labels, MISSING (-1) where absent

The joint score of a truth path ``t`` and weak grid ``y`` is

    sum_l E[l, t_l] + T[t_{l-1}, t_l] + sum_{j observed at l} Pi[j, t_l, y_lj]

with ``t_{-1}`` the start state.  The log-likelihood of the observed weak
labels is the difference of two chain log-partition functions: one with the
weak labels clamped to their observed values and one summing over every
completion of the observed cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .labels import MISSING


class NumericalError(ArithmeticError):
    pass


@dataclass
class LatentChainResult:
    clamped: float
    free: float
    loglik: float
    dE: np.ndarray
    dT: np.ndarray
    dPi: np.ndarray


def _observed(weak):
    weak = np.asarray(weak)
    if weak.dtype == bool:
        return weak
    return weak != MISSING


def _logsumexp_last(A):
    m = A.max(axis=-1, keepdims=True)
    return (m + np.log(np.exp(A - m).sum(axis=-1, keepdims=True)))[..., 0]


def weak_scores(Pi, weak):
    """Per-token aggregated source scores.

    Returns ``(W, free_W)``: ``W[l, k]`` sums ``Pi[j, k, y_lj]`` over sources
    observed at token l; ``free_W[l, k]`` sums ``logsumexp_y Pi[j, k, y]``
    over the same sources.  The sum over a token's weak-label completions
    factorizes per source, which is what makes the free term O(L K^2).
    """
    Pi = np.asarray(Pi, dtype=np.float64)
    weak = np.asarray(weak)
    L, J = weak.shape
    K = Pi.shape[1]
    if J == 0:
        z = np.zeros((L, K))
        return z, z.copy()
    obs = weak != MISSING
    y = np.where(obs, weak, 0)
    # gathered[l, j, k] = Pi[j, k, y[l, j]]
    gathered = Pi[np.arange(J)[None, :], :, y]
    W = np.where(obs[:, :, None], gathered, 0.0).sum(axis=1)
    free_W = obs.astype(np.float64) @ _logsumexp_last(Pi)
    return W, free_W


def free_weak_scores(Pi, observed):
    observed = np.asarray(observed, dtype=bool)
    if observed.shape[1] == 0:
        return np.zeros((observed.shape[0], np.asarray(Pi).shape[1]))
    return observed.astype(np.float64) @ _logsumexp_last(np.asarray(Pi, dtype=np.float64))


def path_score(E, T, tags):
    """Score of ``tags`` under emissions and transitions only."""
    E = np.asarray(E, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    K = E.shape[1]
    prev, s = K, 0.0
    for l, t in enumerate(tags):
        t = int(t)
        if not 0 <= t < K:
            raise IndexError(f"tag {t} at position {l} outside 0..{K - 1}")
        s = s + T[prev, t] + E[l, t]
        prev = t
    return float(s)


def joint_score(E, T, Pi, truth, weak):
    E = np.asarray(E, dtype=np.float64)
    Pi = np.asarray(Pi, dtype=np.float64)
    weak = np.asarray(weak)
    K = E.shape[1]
    truth = np.asarray(truth, dtype=np.int64)
    if truth.shape != (E.shape[0],):
        raise ValueError("truth length does not match emissions")
    if ((weak < MISSING) | (weak >= K)).any():
        raise IndexError("weak label outside the label space")
    s = path_score(E, T, truth)
    W, _ = weak_scores(Pi, weak)
    return float(s + W[np.arange(len(truth)), truth].sum())


def clamped_logsum(E, T, Pi, weak):
    W, _ = weak_scores(Pi, weak)
    return kernels.chain_logz(np.asarray(E, dtype=np.float64) + W, T)


def free_logz(E, T, Pi, weak):
    """Log-partition over truth paths and all labelings of the observed cells.

    ``weak`` may be the weak grid or a boolean observed-cell mask.
    """
    free_W = free_weak_scores(Pi, _observed(weak))
    return kernels.chain_logz(np.asarray(E, dtype=np.float64) + free_W, T)


def crf_logz(E, T):
    return kernels.chain_logz(np.asarray(E, dtype=np.float64), T)


def loglik_and_grad(E, T, Pi, weak) -> LatentChainResult:
    """Marginal log-likelihood of the weak grid and its gradients."""
    E = np.asarray(E, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    Pi = np.asarray(Pi, dtype=np.float64)
    weak = np.asarray(weak)
    J = weak.shape[1]
    K = E.shape[1]
    obs = weak != MISSING

    W, free_W = weak_scores(Pi, weak)
    clamped, node_c, trans_c = kernels.forward_backward(E + W, T)
    free, node_f, trans_f = kernels.forward_backward(E + free_W, T)
    loglik = clamped - free
    if not np.isfinite(loglik):
        raise NumericalError(f"non-finite log-likelihood (clamped={clamped}, free={free})")

    dE = node_c - node_f
    dT = trans_c - trans_f
    dPi = np.zeros((J, K, K))
    if J:
        ls, lj = np.nonzero(obs)
        # clamped: each observed cell routes the truth marginal to its label column
        np.add.at(dPi, (lj, slice(None), weak[ls, lj]), node_c[ls])
        # free: expected truth counts times the per-row softmax over weak labels
        soft = np.exp(Pi - _logsumexp_last(Pi)[..., None])
        counts = obs.T.astype(np.float64) @ node_f
        dPi -= counts[:, :, None] * soft
    return LatentChainResult(clamped, free, loglik, dE, dT, dPi)


def crf_loglik_and_grad(E, T, tags):
    """Supervised CRF log-likelihood of ``tags`` with gradients for E and T."""
    E = np.asarray(E, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    tags = np.asarray(tags, dtype=np.int64)
    L, K = E.shape
    logz, node, tmarg = kernels.forward_backward(E, T)
    score = path_score(E, T, tags)
    loglik = score - logz
    if not np.isfinite(loglik):
        raise NumericalError(f"non-finite log-likelihood (score={score}, logZ={logz})")
    dE = -node
    dE[np.arange(L), tags] += 1.0
    dT = -tmarg
    prev = np.concatenate(([K], tags[:-1]))
    np.add.at(dT, (prev, tags), 1.0)
    return loglik, dE, dT


def viterbi(E, T):
    """Best truth path under emissions and transitions; weak scores are ignored."""
    return kernels.viterbi(np.asarray(E, dtype=np.float64), T)
