"""Emission backbones producing the (L, K) score matrix for a sentence.

Two kinds are provided: a hashed-feature log-linear model and a small
embedding + tanh MLP.  Both expose ``encode`` (tokens -> cached input),
``emit_encoded`` and ``backward_encoded`` so the trainer can featurize each
sentence once.
"""

from __future__ import annotations

import zlib
from typing import Sequence

import numpy as np

DEFAULT_TEMPLATES = (
    "word", "prefix1", "prefix2", "prefix3", "suffix1", "suffix2", "suffix3",
    "shape", "digit", "prev", "next",
)


def _shape(tok):
    out = []
    for ch in tok:
        c = "X" if ch.isupper() else "x" if ch.islower() else "d" if ch.isdigit() else ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def _feature_values(tokens, pos, template):
    tok = tokens[pos]
    low = tok.lower()
    if template == "word":
        return low
    if template.startswith("prefix"):
        return low[: int(template[6:])]
    if template.startswith("suffix"):
        return low[-int(template[6:]):]
    if template == "shape":
        return _shape(tok)
    if template == "digit":
        return "any" if any(c.isdigit() for c in tok) else "none"
    if template == "prev":
        return tokens[pos - 1].lower() if pos > 0 else "<s>"
    if template == "next":
        return tokens[pos + 1].lower() if pos + 1 < len(tokens) else "</s>"
    raise ValueError(f"unknown feature template {template!r}")


class Backbone:
    kind = ""

    def __init__(self, n_labels: int):
        self.n_labels = n_labels

    @property
    def params(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @property
    def feature_config(self) -> dict:
        raise NotImplementedError

    def encode(self, tokens: Sequence[str]):
        raise NotImplementedError

    def emit_encoded(self, enc) -> np.ndarray:
        raise NotImplementedError

    def backward_encoded(self, enc, dE, grads=None) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def emit(self, tokens: Sequence[str]) -> np.ndarray:
        if len(tokens) == 0:
            raise ValueError("cannot score an empty sentence")
        return self.emit_encoded(self.encode(tokens))

    def emit_backward(self, tokens, dE, grads=None) -> dict[str, np.ndarray]:
        """Gradient of ``sum(dE * emit(tokens))`` w.r.t. every parameter.

        When ``grads`` is given the result is accumulated into it in place.
        """
        dE = np.asarray(dE, dtype=np.float64)
        if dE.shape != (len(tokens), self.n_labels):
            raise ValueError(f"dE has shape {dE.shape}, expected {(len(tokens), self.n_labels)}")
        return self.backward_encoded(self.encode(tokens), dE, grads)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def copy(self) -> "Backbone":
        clone = type(self).__new__(type(self))
        clone.__dict__.update(self.__dict__)
        for name, arr in self.params.items():
            setattr(clone, name, arr.copy())
        return clone


class LogLinearBackbone(Backbone):
    """Hashed sparse features, one weight row per hash bucket plus a bias."""

    kind = "log-linear"

    def __init__(self, n_labels, hash_dim=2**18, templates=DEFAULT_TEMPLATES,
                 weights=None, bias=None):
        super().__init__(n_labels)
        self.hash_dim = int(hash_dim)
        self.templates = tuple(templates)
        for t in self.templates:
            _feature_values(["a"], 0, t)  # validates the template name
        self.weights = (np.zeros((self.hash_dim, n_labels)) if weights is None
                        else np.array(weights, dtype=np.float64))
        self.bias = np.zeros(n_labels) if bias is None else np.array(bias, dtype=np.float64)
        if self.weights.shape != (self.hash_dim, n_labels) or self.bias.shape != (n_labels,):
            raise ValueError("log-linear parameter shapes do not match the configuration")

    @property
    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    @property
    def feature_config(self):
        return {"hash_dim": self.hash_dim, "templates": list(self.templates)}

    def feature_index(self, template, value):
        return zlib.crc32(f"{template}={value}".encode("utf-8")) % self.hash_dim

    def encode(self, tokens):
        return np.array(
            [[self.feature_index(t, _feature_values(tokens, pos, t)) for t in self.templates]
             for pos in range(len(tokens))],
            dtype=np.int64,
        ).reshape(len(tokens), len(self.templates))

    def emit_encoded(self, idx):
        return self.weights[idx].sum(axis=1) + self.bias

    def backward_encoded(self, idx, dE, grads=None):
        if grads is None:
            grads = self.zero_grads()
        F = idx.shape[1]
        np.add.at(grads["weights"], idx.ravel(), np.repeat(dE, F, axis=0))
        grads["bias"] += dE.sum(axis=0)
        return grads


class MLPBackbone(Backbone):
    """Token embeddings averaged over a +-1 window, one tanh layer, K logits.

    Index 0 of the embedding table is the unknown-token row.
    """

    kind = "tiny-mlp"

    def __init__(self, n_labels, vocab, emb_dim=32, hidden=64, rng=None, params=None):
        super().__init__(n_labels)
        self.vocab = list(vocab)
        self._ids = {tok: i + 1 for i, tok in enumerate(self.vocab)}
        self.emb_dim, self.hidden = int(emb_dim), int(hidden)
        V = len(self.vocab) + 1
        if params is not None:
            self.emb, self.W1, self.b1, self.W2, self.b2 = (
                np.array(params[k], dtype=np.float64) for k in ("emb", "W1", "b1", "W2", "b2"))
            shapes = [(V, self.emb_dim), (self.emb_dim, self.hidden), (self.hidden,),
                      (self.hidden, n_labels), (n_labels,)]
            if [p.shape for p in self.params.values()] != shapes:
                raise ValueError("tiny-mlp parameter shapes do not match the configuration")
        elif rng is None:
            self.emb = np.zeros((V, self.emb_dim))
            self.W1 = np.zeros((self.emb_dim, self.hidden))
            self.b1 = np.zeros(self.hidden)
            self.W2 = np.zeros((self.hidden, n_labels))
            self.b2 = np.zeros(n_labels)
        else:
            self.emb = rng.normal(0.0, 0.1, (V, self.emb_dim))
            self.W1 = rng.normal(0.0, 1.0 / np.sqrt(self.emb_dim), (self.emb_dim, self.hidden))
            self.b1 = np.zeros(self.hidden)
            self.W2 = rng.normal(0.0, 1.0 / np.sqrt(self.hidden), (self.hidden, n_labels))
            self.b2 = np.zeros(n_labels)

    @property
    def params(self):
        return {"emb": self.emb, "W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    @property
    def feature_config(self):
        return {"emb_dim": self.emb_dim, "hidden": self.hidden, "vocab": self.vocab}

    def encode(self, tokens):
        ids = np.array([self._ids.get(t.lower(), 0) for t in tokens], dtype=np.int64)
        L = len(ids)
        # window[l] lists the positions averaged for token l
        window = [list(range(max(0, l - 1), min(L, l + 2))) for l in range(L)]
        return ids, window

    def _forward(self, enc):
        ids, window = enc
        ctx = np.stack([self.emb[ids[w]].mean(axis=0) for w in window])
        H = np.tanh(ctx @ self.W1 + self.b1)
        return ctx, H

    def emit_encoded(self, enc):
        _, H = self._forward(enc)
        return H @ self.W2 + self.b2

    def backward_encoded(self, enc, dE, grads=None):
        if grads is None:
            grads = self.zero_grads()
        ids, window = enc
        ctx, H = self._forward(enc)
        grads["W2"] += H.T @ dE
        grads["b2"] += dE.sum(axis=0)
        dZ = (dE @ self.W2.T) * (1.0 - H * H)
        grads["W1"] += ctx.T @ dZ
        grads["b1"] += dZ.sum(axis=0)
        dctx = dZ @ self.W1.T
        for l, w in enumerate(window):
            np.add.at(grads["emb"], ids[w], dctx[l] / len(w))
        return grads


def build_backbone(kind, n_labels, config=None, vocab=None, rng=None) -> Backbone:
    config = dict(config or {})
    if kind == LogLinearBackbone.kind:
        return LogLinearBackbone(n_labels, config.get("hash_dim", 2**18),
                                 config.get("templates", DEFAULT_TEMPLATES))
    if kind == MLPBackbone.kind:
        if vocab is None:
            vocab = config.get("vocab")
        if vocab is None:
            raise ValueError("tiny-mlp backbone needs a vocabulary")
        return MLPBackbone(n_labels, vocab, config.get("emb_dim", 32),
                           config.get("hidden", 64), rng=rng)
    raise ValueError(f"unknown backbone kind {kind!r}")


def corpus_vocab(token_lists, min_count=1):
    """Sorted lowercased vocabulary with at least ``min_count`` occurrences."""
    counts = {}
    for toks in token_lists:
        for t in toks:
            t = t.lower()
            counts[t] = counts.get(t, 0) + 1
    return sorted(t for t, c in counts.items() if c >= min_count)
