"""Token accuracy and strict span precision/recall/F1.

Span scores are micro-averaged: matched, predicted and gold span counts are
pooled over the corpus before taking ratios.  A span matches only when type
and both boundaries agree.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .labels import extract_spans


def _as_corpus(seqs):
    seqs = list(seqs)
    if seqs and np.ndim(seqs[0]) == 0:
        return [seqs]
    return seqs


def _check_aligned(gold, pred):
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: gold length {len(g)} != predicted length {len(p)}")


def span_counts(gold, pred, space):
    """``(n_matched, n_pred, n_gold, per_type)`` pooled over sentences."""
    gold, pred = _as_corpus(gold), _as_corpus(pred)
    _check_aligned(gold, pred)
    matched = n_pred = n_gold = 0
    per_type = {}
    for g, p in zip(gold, pred):
        gs, ps = set(extract_spans(g, space)), set(extract_spans(p, space))
        hits = gs & ps
        matched += len(hits)
        n_pred += len(ps)
        n_gold += len(gs)
        for key, spans in (("tp", hits), ("pred", ps), ("gold", gs)):
            for etype, c in Counter(s.entity_type for s in spans).items():
                per_type.setdefault(etype, {"tp": 0, "pred": 0, "gold": 0})[key] += c
    return matched, n_pred, n_gold, per_type


def prf(matched, n_pred, n_gold):
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    p = matched / n_pred if n_pred else 0.0
    r = matched / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def span_prf(gold, pred, space):
    matched, n_pred, n_gold, _ = span_counts(gold, pred, space)
    return prf(matched, n_pred, n_gold)


def token_accuracy(gold, pred):
    gold, pred = _as_corpus(gold), _as_corpus(pred)
    _check_aligned(gold, pred)
    total = sum(len(g) for g in gold)
    if total == 0:
        raise ValueError("no tokens to score")
    hits = sum(int(np.sum(np.asarray(g) == np.asarray(p))) for g, p in zip(gold, pred))
    return hits / total


def score_predictions(gold, pred, space) -> dict:
    """Metrics dict; span fields are None unless the scheme is BIO."""
    out = {
        "precision": None, "recall": None, "f1": None,
        "token_accuracy": token_accuracy(gold, pred),
        "n_sentences": len(gold),
        "n_gold_spans": None, "n_pred_spans": None,
    }
    if space.scheme == "BIO":
        matched, n_pred, n_gold, per_type = span_counts(gold, pred, space)
        p, r, f = prf(matched, n_pred, n_gold)
        detail = {t: dict(zip(("precision", "recall", "f1"), prf(c["tp"], c["pred"], c["gold"])))
                  for t, c in sorted(per_type.items())}
        out.update(precision=p, recall=r, f1=f, n_gold_spans=n_gold, n_pred_spans=n_pred,
                   detail=detail)
    return out


def evaluate_inference(model, dataset) -> dict:
    """Decode every sentence with the classifier and score against gold."""
    if not dataset.has_gold:
        raise ValueError("evaluation needs gold labels for every sentence")
    pred = model.decode_all([s.tokens for s in dataset.sentences])
    return score_predictions([s.gold for s in dataset.sentences], pred, dataset.space)


def format_table(metrics: dict) -> str:
    rows = [("precision", metrics["precision"]), ("recall", metrics["recall"]),
            ("f1", metrics["f1"]), ("token_accuracy", metrics["token_accuracy"]),
            ("n_sentences", metrics["n_sentences"]), ("n_gold_spans", metrics["n_gold_spans"]),
            ("n_pred_spans", metrics["n_pred_spans"])]
    lines = []
    for name, v in rows:
        if v is None:
            v = "-"
        elif isinstance(v, float):
            v = f"{v:.4f}"
        lines.append(f"{name:<16}{v}")
    return "\n".join(lines)
