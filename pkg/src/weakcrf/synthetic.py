"""Synthetic weak-supervision corpora with planted annotator confusions.

Truth sequences come from a first-order Markov chain, tokens from per-label
symbol distributions, and each source labels each token independently
through its own confusion matrix (or abstains with ``missing_rate``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dataset import Sentence, WeakDataset
from .labels import MISSING, LabelSpace
from .sources import confusion_counts, row_normalize


def _stochastic(name, M, shape):
    M = np.asarray(M, dtype=np.float64)
    if M.shape != shape:
        raise ValueError(f"{name} has shape {M.shape}, expected {shape}")
    if (M < 0).any() or np.abs(M.sum(axis=-1) - 1.0).max() > 1e-12:
        raise ValueError(f"{name} rows must be non-negative and sum to 1")
    return M


@dataclass
class SynthConfig:
    transition: np.ndarray       # (K, K)
    initial: np.ndarray          # (K,)
    emission: np.ndarray         # (K, V)
    confusions: np.ndarray       # (J, K, K)
    n_sentences: int = 100
    length_range: tuple[int, int] = (5, 15)
    missing_rate: object = 0.0   # scalar or one value per source
    seed: int = 0

    def __post_init__(self):
        conf = np.asarray(self.confusions, dtype=np.float64)
        if conf.ndim != 3:
            raise ValueError("confusions must be a (J, K, K) array")
        J, K = conf.shape[0], conf.shape[1]
        if K < 2:
            raise ValueError("need at least 2 labels")
        self.confusions = _stochastic("confusions", conf, (J, K, K))
        self.transition = _stochastic("transition", self.transition, (K, K))
        self.initial = _stochastic("initial", self.initial, (K,))
        em = np.asarray(self.emission, dtype=np.float64)
        if em.ndim != 2:
            raise ValueError("emission must be a (K, V) array")
        self.emission = _stochastic("emission", em, (K, em.shape[1]))
        rates = np.broadcast_to(np.asarray(self.missing_rate, dtype=np.float64), (J,)).copy()
        if ((rates < 0) | (rates >= 1)).any():
            raise ValueError("missing_rate must lie in [0, 1)")
        self.missing_rate = rates
        lo, hi = self.length_range
        if not 1 <= lo <= hi:
            raise ValueError("length_range must satisfy 1 <= min <= max")
        self.length_range = (int(lo), int(hi))
        if self.n_sentences < 0:
            raise ValueError("n_sentences must be non-negative")

    @property
    def K(self):
        return self.transition.shape[0]

    @property
    def J(self):
        return self.confusions.shape[0]

    @classmethod
    def planted(cls, K=5, J=5, n_sentences=2000, length_range=(5, 15), accuracies=None,
                missing_rate=0.3, seed=0, stay=0.95, vocab_size=200, block_size=20,
                block_mass=0.6):
        """Build a config from a handful of knobs.

        Source j gets diagonal ``accuracies[j]`` (default: evenly spread over
        [0.55, 0.90]) with the remaining row mass split over the other labels
        by a seeded Dirichlet draw.  Label k puts ``block_mass`` on its own
        block of ``block_size`` symbols; the rest is uniform over the vocabulary.
        Truth labels persist with probability ``stay``; with the default
        symbol distributions, token context only pins down the truth when
        runs are long.
        """
        if K * block_size > vocab_size:
            raise ValueError("vocabulary too small for disjoint label blocks")
        rng = np.random.default_rng([seed, 1])
        acc = np.linspace(0.55, 0.90, J) if accuracies is None else np.asarray(accuracies, float)
        if acc.shape != (J,):
            raise ValueError("need one accuracy per source")
        conf = np.zeros((J, K, K))
        for j in range(J):
            for k in range(K):
                off = rng.dirichlet(np.ones(K - 1)) * (1.0 - acc[j])
                conf[j, k] = np.insert(off, k, acc[j])
        trans = np.full((K, K), (1.0 - stay) / (K - 1))
        np.fill_diagonal(trans, stay)
        emission = np.full((K, vocab_size), (1.0 - block_mass) / vocab_size)
        for k in range(K):
            emission[k, k * block_size:(k + 1) * block_size] += block_mass / block_size
        return cls(_renorm(trans), np.full(K, 1.0 / K), _renorm(emission), _renorm(conf),
                   n_sentences, tuple(length_range), missing_rate, seed)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "confusions" in d:
            return cls(**d)
        return cls.planted(**d)

    def to_dict(self):
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
        out["length_range"] = list(self.length_range)
        return out


def _renorm(M):
    return M / M.sum(axis=-1, keepdims=True)


def _sample_rows(rng, cdf_rows):
    u = rng.random(cdf_rows.shape[:-1])
    idx = (u[..., None] >= cdf_rows).sum(axis=-1)
    return np.minimum(idx, cdf_rows.shape[-1] - 1)


def label_names(K):
    return tuple(f"C{k}" for k in range(K))


def generate(cfg: SynthConfig):
    """Sample a dataset with gold labels; returns ``(WeakDataset, confusions)``."""
    rng = np.random.default_rng(cfg.seed)
    K, J = cfg.K, cfg.J
    space = LabelSpace(label_names(K), "free")
    trans_cdf = np.cumsum(cfg.transition, axis=1)
    init_cdf = np.cumsum(cfg.initial)
    emit_cdf = np.cumsum(cfg.emission, axis=1)
    conf_cdf = np.cumsum(cfg.confusions, axis=2)
    lo, hi = cfg.length_range
    sentences = []
    for _ in range(cfg.n_sentences):
        L = int(rng.integers(lo, hi + 1))
        t = np.empty(L, dtype=np.int64)
        t[0] = _sample_rows(rng, init_cdf)
        for l in range(1, L):
            t[l] = _sample_rows(rng, trans_cdf[t[l - 1]])
        sym = _sample_rows(rng, emit_cdf[t])
        weak = _sample_rows(rng, conf_cdf[np.arange(J)[None, :], t[:, None]])
        weak[rng.random((L, J)) < cfg.missing_rate[None, :]] = MISSING
        sentences.append(Sentence([f"w{s}" for s in sym], weak.reshape(L, J), t))
    ds = WeakDataset(space, [f"src{j}" for j in range(J)], sentences)
    return ds, cfg.confusions.copy()


def empirical_confusion(dataset, j):
    """Row-normalized (gold, weak) frequencies for source ``j``; empty rows uniform."""
    if not dataset.has_gold:
        raise ValueError("empirical confusion needs gold labels")
    return row_normalize(confusion_counts(dataset, [s.gold for s in dataset.sentences])[j])


def sidecar(dataset, confusions) -> dict:
    return {
        "labels": list(dataset.space.labels),
        "sources": list(dataset.source_names),
        "confusions": {name: np.asarray(c).tolist()
                       for name, c in zip(dataset.source_names, confusions)},
    }
