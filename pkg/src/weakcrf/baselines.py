"""Majority voting and the supervised CRF trained on fixed tags."""

from __future__ import annotations

import numpy as np

from .labels import MISSING


def majority_vote(sentence, space) -> np.ndarray:
    """Per-token mode of the observed weak labels.

    Ties go to the lowest label index; tokens nobody labeled get
    ``space.fallback_index``.
    """
    K = space.K
    out = np.empty(len(sentence), dtype=np.int64)
    for l, row in enumerate(sentence.weak):
        row = row[row != MISSING]
        if row.size == 0:
            out[l] = space.fallback_index
        else:
            out[l] = int(np.bincount(row, minlength=K).argmax())
    return out


def majority_vote_all(dataset) -> list[np.ndarray]:
    return [majority_vote(s, dataset.space) for s in dataset.sentences]


def train_supervised(dataset, tags, cfg, backbone=None, transition=None, rng=None,
                     epochs=None, steps=None):
    """Fit backbone + transitions to fixed ``tags`` with the plain CRF loss.

    Thin wrapper over the trainer's supervised loop; returns
    ``(ModelParams, history)``.
    """
    from .trainer import fit_supervised

    return fit_supervised(dataset, tags, cfg, backbone=backbone, transition=transition,
                          rng=rng, epochs=epochs, steps=steps)
