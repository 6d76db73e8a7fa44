"""Initialization, export and comparison of per-source score matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import MISSING


@dataclass(frozen=True)
class SourceInitConfig:
    rho: float = 2.0
    smoothing: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.smoothing >= 0:
            raise ValueError("smoothing must be non-negative")


class CorrelationError(ValueError):
    pass


def confusion_counts(dataset, truth) -> np.ndarray:
    """counts[j, m, n] = #tokens with truth m that source j labeled n."""
    K, J = dataset.space.K, dataset.n_sources
    if len(truth) != len(dataset.sentences):
        raise ValueError(f"{len(truth)} truth sequences for {len(dataset.sentences)} sentences")
    counts = np.zeros((J, K, K))
    for i, (s, t) in enumerate(zip(dataset.sentences, truth)):
        t = np.asarray(t, dtype=np.int64)
        if t.shape != (len(s),):
            raise ValueError(f"truth for sentence {i} has wrong length")
        ls, js = np.nonzero(s.weak != MISSING)
        np.add.at(counts, (js, t[ls], s.weak[ls, js]), 1.0)
    return counts


def row_normalize(counts, scale=1.0, smoothing=0.0):
    """Scale * row frequencies; rows with no mass become uniform."""
    K = counts.shape[-1]
    counts = counts + smoothing
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(totals > 0, counts / totals, 1.0 / K)
    return scale * out


def init_weak_matrices(dataset, mv_labels, cfg: SourceInitConfig = SourceInitConfig()):
    """rho times the row-normalized agreement counts against ``mv_labels``."""
    return row_normalize(confusion_counts(dataset, mv_labels), cfg.rho, cfg.smoothing)


def uniform_diag_matrices(J, K):
    return np.broadcast_to(np.eye(K) / K, (J, K, K)).copy()


def export_matrix(M, mode="softmax"):
    """Row-stochastic view of a raw score matrix.

    ``clamp`` zeroes non-positive entries before normalizing (an all
    non-positive row becomes uniform); ``softmax`` exponentiates first.
    """
    M = np.asarray(M, dtype=np.float64)
    if mode == "clamp":
        return row_normalize(np.where(M > 0, M, 0.0))
    if mode == "softmax":
        e = np.exp(M - M.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown export mode {mode!r}")


def matrix_correlation(estimated, reference) -> float:
    """Pearson correlation over all matrix elements."""
    a = np.asarray(estimated, dtype=np.float64).ravel()
    b = np.asarray(reference, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("matrices differ in shape")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise CorrelationError("correlation undefined for a constant matrix")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))
