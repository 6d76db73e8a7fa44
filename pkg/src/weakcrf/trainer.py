"""Training of the latent-truth CRF from weak labels, and model persistence."""

from __future__ import annotations

import base64
import dataclasses
import json
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import crf
from .baselines import majority_vote_all
from .dataset import atomic_write_text
from .emission import Backbone, LogLinearBackbone, MLPBackbone, build_backbone, corpus_vocab
from .labels import LabelSpace
from .metrics import evaluate_inference
from .optim import make_optimizer
from .sources import SourceInitConfig, init_weak_matrices, uniform_diag_matrices

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
INIT_VARIANTS = ("paper", "uniform_diag", "weak_classifier")


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr_backbone: float = 1e-2
    lr_crf: float = 1e-2
    lr_weak: float = 1e-3
    rho: float = 2.0
    smoothing: float = 0.0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    pretrain_epochs: int = 1
    pretrain_steps: int | None = None
    weak_classifier_steps: int = 50
    backbone: str = "log-linear"
    backbone_config: dict = field(default_factory=dict)
    threads: int = 1
    early_stopping_patience: int | None = None
    no_weak_transition: bool = False
    no_crf_transition: bool = False
    freeze_source: bool = False
    crf_scale: float = 1.0
    emission_scale: float = 1.0
    init_variant: str = "paper"

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.pretrain_steps is not None and self.pretrain_steps < 0:
            raise ValueError("pretrain_steps must be non-negative")
        if not (self.lr_backbone > 0 and self.lr_crf > 0):
            raise ValueError("learning rates must be positive")
        # zero is allowed: it pins the source matrices at their initialization
        if not self.lr_weak >= 0:
            raise ValueError("lr_weak must be non-negative")
        if self.lr_weak > self.lr_crf:
            warnings.warn(f"lr_weak ({self.lr_weak}) exceeds lr_crf ({self.lr_crf}); "
                          "a weak-source rate at or below the CRF rate is recommended",
                          stacklevel=3)
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.init_variant not in INIT_VARIANTS:
            raise ValueError(f"init_variant must be one of {INIT_VARIANTS}")
        if self.backbone not in (LogLinearBackbone.kind, MLPBackbone.kind):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if not (math.isfinite(self.crf_scale) and math.isfinite(self.emission_scale)):
            raise ValueError("inference scales must be finite")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class ModelParams:
    backbone: Backbone
    T: np.ndarray
    Pi: np.ndarray
    space: LabelSpace
    source_names: list[str]
    crf_scale: float = 1.0
    emission_scale: float = 1.0

    def __post_init__(self):
        K, J = self.space.K, len(self.source_names)
        self.T = np.asarray(self.T, dtype=np.float64)
        self.Pi = np.asarray(self.Pi, dtype=np.float64)
        if J == 0 and self.Pi.size == 0:
            self.Pi = self.Pi.reshape(0, K, K)
        if self.T.shape != (K + 1, K):
            raise ModelFormatError(f"transition matrix shape {self.T.shape}, expected {(K + 1, K)}")
        if self.Pi.shape != (J, K, K):
            raise ModelFormatError(f"source matrices shape {self.Pi.shape}, expected {(J, K, K)}")
        if self.backbone.n_labels != K:
            raise ModelFormatError("backbone label count does not match the label space")

    def decode(self, tokens):
        """Viterbi path using the classifier part only."""
        E = self.backbone.emit(tokens) * self.emission_scale
        return crf.viterbi(E, self.T * self.crf_scale)[0]

    def decode_all(self, token_lists):
        return [self.decode(t) for t in token_lists]

    def copy(self):
        return dataclasses.replace(self, backbone=self.backbone.copy(), T=self.T.copy(),
                                   Pi=self.Pi.copy())


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _batches(rng, n, batch_size):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


class _Problem:
    """Encoded corpus plus the per-sentence objective for one training phase.

    With ``tags`` set the objective is the supervised CRF likelihood of those
    tags, otherwise the marginal likelihood of the weak labels.
    """

    def __init__(self, dataset, backbone, T, Pi, tags, threads):
        self.dataset = dataset
        self.backbone = backbone
        self.T = T
        self.Pi = Pi
        self.tags = tags
        self.threads = threads
        self.enc = [backbone.encode(s.tokens) for s in dataset.sentences]

    def _checked(self, i, fn):
        try:
            out = fn(i)
        except crf.NumericalError as exc:
            raise TrainingError(f"sentence {i}: {exc}") from exc
        ll = out[0] if isinstance(out, tuple) else out
        if not math.isfinite(ll):
            raise TrainingError(f"non-finite loss at sentence {i}")
        return out

    def _loglik(self, i):
        E = self.backbone.emit_encoded(self.enc[i])
        if self.tags is not None:
            return crf.path_score(E, self.T, self.tags[i]) - crf.crf_logz(E, self.T)
        weak = self.dataset.sentences[i].weak
        return crf.clamped_logsum(E, self.T, self.Pi, weak) - crf.free_logz(E, self.T, self.Pi, weak)

    def _loglik_and_grad(self, i):
        E = self.backbone.emit_encoded(self.enc[i])
        if self.tags is not None:
            ll, dE, dT = crf.crf_loglik_and_grad(E, self.T, self.tags[i])
            return ll, dE, dT, None
        r = crf.loglik_and_grad(E, self.T, self.Pi, self.dataset.sentences[i].weak)
        return r.loglik, r.dE, r.dT, r.dPi

    def mean_loss(self):
        lls = _map(lambda i: self._checked(i, self._loglik), range(len(self.enc)), self.threads)
        return -math.fsum(lls) / max(len(lls), 1)

    def batch_grads(self, idx):
        """Mean negative log-likelihood of the batch and its gradients."""
        results = _map(lambda i: self._checked(i, self._loglik_and_grad), idx, self.threads)
        B = len(idx)
        gb = self.backbone.zero_grads()
        gT = np.zeros_like(self.T)
        gPi = np.zeros_like(self.Pi) if self.tags is None else None
        loss = 0.0
        # reduction in batch order keeps results independent of thread scheduling
        for i, (ll, dE, dT, dPi) in zip(idx, results):
            loss -= ll / B
            self.backbone.backward_encoded(self.enc[i], -dE / B, gb)
            gT -= dT / B
            if gPi is not None:
                gPi -= dPi / B
        return loss, gb, gT, gPi


def _history_row(epoch, loss, t0):
    return {"epoch": epoch, "mean_neg_loglik": loss, "wall_seconds": time.perf_counter() - t0}


def _new_backbone(dataset, cfg, rng):
    if cfg.backbone == MLPBackbone.kind:
        vocab = cfg.backbone_config.get("vocab") or corpus_vocab(s.tokens for s in dataset.sentences)
        return build_backbone(cfg.backbone, dataset.space.K, cfg.backbone_config, vocab, rng)
    return build_backbone(cfg.backbone, dataset.space.K, cfg.backbone_config)


def fit_supervised(dataset, tags, cfg: TrainConfig, backbone=None, transition=None, rng=None,
                   epochs=None, steps=None):
    """Plain CRF training on fixed tags; returns ``(ModelParams, history)``.

    With ``steps`` set, training stops after that many mini-batch updates.
    """
    if len(tags) != len(dataset.sentences):
        raise ValueError("tags are not aligned with the dataset")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    K, J = dataset.space.K, dataset.n_sources
    backbone = _new_backbone(dataset, cfg, rng) if backbone is None else backbone
    T = np.zeros((K + 1, K)) if transition is None else transition
    epochs = cfg.epochs if epochs is None else epochs
    n = len(dataset.sentences)
    if steps is not None:
        epochs = math.ceil(steps / math.ceil(n / cfg.batch_size)) if n else 0
    problem = _Problem(dataset, backbone, T, None, [np.asarray(t) for t in tags], cfg.threads)
    opt_b = make_optimizer(cfg.optimizer, cfg.lr_backbone, cfg.beta1, cfg.beta2, cfg.eps)
    opt_t = make_optimizer(cfg.optimizer, cfg.lr_crf, cfg.beta1, cfg.beta2, cfg.eps)
    t0 = time.perf_counter()
    history = [_history_row(0, problem.mean_loss(), t0)] if epochs else []
    done = 0
    for epoch in range(1, epochs + 1):
        for idx in _batches(rng, n, cfg.batch_size):
            if steps is not None and done >= steps:
                break
            _, gb, gT, _ = problem.batch_grads(idx)
            opt_b.step(backbone.params, gb)
            if not cfg.no_crf_transition:
                opt_t.step({"T": T}, {"T": gT})
            done += 1
        history.append(_history_row(epoch, problem.mean_loss(), t0))
        log.info("supervised epoch %d: loss %.5f", epoch, history[-1]["mean_neg_loglik"])
        if steps is not None and done >= steps:
            break
    params = ModelParams(backbone, T, np.zeros((J, K, K)), dataset.space,
                         list(dataset.source_names), cfg.crf_scale, cfg.emission_scale)
    return params, history


def initialize(dataset, cfg: TrainConfig, rng):
    """MV labels, classifier pre-training and source-matrix initialization."""
    K, J = dataset.space.K, dataset.n_sources
    mv = majority_vote_all(dataset)
    backbone = _new_backbone(dataset, cfg, rng)
    T = np.zeros((K + 1, K))
    steps = cfg.pretrain_steps
    if cfg.init_variant == "weak_classifier" and steps is None:
        steps = cfg.weak_classifier_steps
    if steps is not None or cfg.pretrain_epochs > 0:
        fit_supervised(dataset, mv, cfg, backbone, T, rng, epochs=cfg.pretrain_epochs, steps=steps)
    if cfg.init_variant == "uniform_diag":
        Pi = uniform_diag_matrices(J, K)
    else:
        Pi = init_weak_matrices(dataset, mv, SourceInitConfig(cfg.rho, cfg.smoothing))
    return mv, backbone, T, Pi


def train(dataset, cfg: TrainConfig, dev=None):
    """Fit the model to ``dataset``'s weak labels.

    Returns ``(ModelParams, history)`` where history rows hold the mean
    negative log-likelihood over the corpus after each epoch (row 0 is the
    initialized model).  ``dev`` with gold labels enables early stopping
    when ``cfg.early_stopping_patience`` is set.
    """
    if not dataset.sentences:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    K = dataset.space.K
    if cfg.no_weak_transition:
        mv = majority_vote_all(dataset)
        params, history = fit_supervised(dataset, mv, cfg, rng=rng,
                                         epochs=cfg.pretrain_epochs + cfg.epochs)
        params.Pi = init_weak_matrices(dataset, mv, SourceInitConfig(cfg.rho, cfg.smoothing))
        return params, history

    _, backbone, T, Pi = initialize(dataset, cfg, rng)
    if cfg.no_crf_transition:
        T[:] = 0.0
    problem = _Problem(dataset, backbone, T, Pi, None, cfg.threads)
    opts = {
        "backbone": make_optimizer(cfg.optimizer, cfg.lr_backbone, cfg.beta1, cfg.beta2, cfg.eps),
        "crf": make_optimizer(cfg.optimizer, cfg.lr_crf, cfg.beta1, cfg.beta2, cfg.eps),
        "weak": make_optimizer(cfg.optimizer, cfg.lr_weak, cfg.beta1, cfg.beta2, cfg.eps),
    }

    def snapshot():
        return ModelParams(backbone.copy(), T.copy(), Pi.copy(), dataset.space,
                           list(dataset.source_names), cfg.crf_scale, cfg.emission_scale)

    t0 = time.perf_counter()
    history = [_history_row(0, problem.mean_loss(), t0)]
    best, best_score, stale = None, -math.inf, 0
    n = len(dataset.sentences)
    for epoch in range(1, cfg.epochs + 1):
        for idx in _batches(rng, n, cfg.batch_size):
            _, gb, gT, gPi = problem.batch_grads(idx)
            opts["backbone"].step(backbone.params, gb)
            if not cfg.no_crf_transition:
                opts["crf"].step({"T": T}, {"T": gT})
            if not cfg.freeze_source:
                opts["weak"].step({"Pi": Pi}, {"Pi": gPi})
        history.append(_history_row(epoch, problem.mean_loss(), t0))
        log.info("epoch %d: loss %.5f", epoch, history[-1]["mean_neg_loglik"])
        if dev is not None and cfg.early_stopping_patience is not None:
            score = evaluate_inference(snapshot(), dev)["f1" if dev.space.scheme == "BIO"
                                                         else "token_accuracy"]
            if score > best_score:
                best, best_score, stale = snapshot(), score, 0
            else:
                stale += 1
                if stale >= cfg.early_stopping_patience:
                    log.info("early stopping after epoch %d", epoch)
                    break
    return (best if best is not None else snapshot()), history


def _encode_array(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d):
    try:
        raw = base64.b64decode(d["data"], validate=True)
        a = np.frombuffer(raw, dtype=np.dtype(d["dtype"])).astype(np.float64)
        return a.reshape(d["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt array: {exc}") from None


def model_to_dict(params: ModelParams) -> dict:
    bb = params.backbone
    return {
        "format_version": FORMAT_VERSION,
        "labels": list(params.space.labels),
        "scheme": params.space.scheme,
        "sources": list(params.source_names),
        "backbone": {
            "kind": bb.kind,
            "n_labels": bb.n_labels,
            "feature_config": bb.feature_config,
            "weights": {k: _encode_array(v) for k, v in bb.params.items()},
        },
        "crf_transition": _encode_array(params.T),
        "weak_matrices": [_encode_array(m) for m in params.Pi],
        "inference": {"crf_scale": params.crf_scale, "emission_scale": params.emission_scale},
    }


def model_from_dict(d) -> ModelParams:
    if not isinstance(d, dict):
        raise ModelFormatError("model file must hold a JSON object")
    if d.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {d.get('format_version')!r}")
    try:
        space = LabelSpace(tuple(d["labels"]), d["scheme"])
        sources = list(d["sources"])
        bd = d["backbone"]
        weights = {k: _decode_array(v) for k, v in bd["weights"].items()}
        cfgd = bd["feature_config"]
        K = space.K
        if bd.get("n_labels", K) != K:
            raise ModelFormatError("backbone label count does not match declared labels")
        if bd["kind"] == LogLinearBackbone.kind:
            backbone = LogLinearBackbone(K, cfgd["hash_dim"], cfgd["templates"],
                                         weights["weights"], weights["bias"])
        elif bd["kind"] == MLPBackbone.kind:
            backbone = MLPBackbone(K, cfgd["vocab"], cfgd["emb_dim"], cfgd["hidden"],
                                   params=weights)
        else:
            raise ModelFormatError(f"unknown backbone kind {bd['kind']!r}")
        T = _decode_array(d["crf_transition"])
        Pi = np.array([_decode_array(m) for m in d["weak_matrices"]])
        inf = d.get("inference", {})
        return ModelParams(backbone, T, Pi, space, sources,
                           float(inf.get("crf_scale", 1.0)), float(inf.get("emission_scale", 1.0)))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from None


def save_model(params: ModelParams, path) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(params)))


def load_model(path) -> ModelParams:
    try:
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from None
    return model_from_dict(d)
