"""Command line entry point: ``weakcrf <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a run
fails at runtime.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import selfcheck as _selfcheck
from .baselines import majority_vote_all
from .dataset import atomic_write_text, read_predictions, read_wsconll, write_predictions, \
    write_wsconll
from .labels import FormatError
from .metrics import format_table, score_predictions
from .sources import CorrelationError, export_matrix, matrix_correlation
from .synthetic import SynthConfig, generate, sidecar
from .trainer import ModelFormatError, TrainConfig, load_model, save_model, train

log = logging.getLogger("weakcrf")

THREADS_ENV = "WEAKCRF_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def _default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        return int(env)
    return os.cpu_count() or 1


def cmd_synth(args):
    cfg_dict = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    ds, conf = generate(SynthConfig.from_dict(cfg_dict))
    write_wsconll(args.out, ds)
    side = args.sidecar or os.path.splitext(args.out)[0] + ".confusions.json"
    _write_json(side, sidecar(ds, conf))
    print(f"wrote {len(ds)} sentences to {args.out} and confusions to {side}")


def cmd_mv(args):
    ds = read_wsconll(args.data)
    write_predictions(args.out, [s.tokens for s in ds.sentences], majority_vote_all(ds), ds.space)
    print(f"wrote majority-vote predictions for {len(ds)} sentences to {args.out}")


TRAIN_FLAGS = {
    "epochs": int, "batch_size": int, "lr_backbone": float, "lr_crf": float,
    "lr_weak": float, "rho": float, "optimizer": str, "pretrain_epochs": int,
    "pretrain_steps": int, "backbone": str, "early_stopping_patience": int,
    "init_variant": str,
}


def build_train_config(args) -> TrainConfig:
    d = _read_json(args.config) if args.config else {}
    for name in TRAIN_FLAGS:
        v = getattr(args, name)
        if v is not None:
            d[name] = v
    if args.seed is not None:
        d["seed"] = args.seed
    if args.crf_scale is not None:
        d["crf_scale"] = args.crf_scale
    if args.emission_scale is not None:
        d["emission_scale"] = args.emission_scale
    for flag in ("no_weak_transition", "no_crf_transition", "freeze_source"):
        if getattr(args, flag):
            d[flag] = True
    d["threads"] = args.threads if args.threads is not None else d.get("threads", _default_threads())
    return TrainConfig.from_dict(d)


def format_history(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "mean_neg_loglik", "wall_seconds"])
    for row in history:
        w.writerow([row["epoch"], repr(row["mean_neg_loglik"]), f"{row['wall_seconds']:.3f}"])
    return buf.getvalue()


def cmd_train(args):
    cfg = build_train_config(args)
    ds = read_wsconll(args.data)
    dev = read_wsconll(args.dev) if args.dev else None
    params, history = train(ds, cfg, dev=dev)
    save_model(params, args.out)
    hist_path = args.history or os.path.splitext(args.out)[0] + ".history.csv"
    atomic_write_text(hist_path, format_history(history))
    final = history[-1]["mean_neg_loglik"] if history else float("nan")
    print(f"trained {cfg.epochs} epochs, final mean neg loglik {final:.5f}; "
          f"model {args.out}, history {hist_path}")


def cmd_infer(args):
    model = load_model(args.model)
    if args.crf_scale is not None:
        model.crf_scale = args.crf_scale
    if args.emission_scale is not None:
        model.emission_scale = args.emission_scale
    ds = read_wsconll(args.data)
    if tuple(ds.space.labels) != tuple(model.space.labels):
        raise FormatError("dataset labels differ from the model's labels")
    tokens = [s.tokens for s in ds.sentences]
    write_predictions(args.out, tokens, model.decode_all(tokens), model.space)
    print(f"wrote predictions for {len(ds)} sentences to {args.out}")


def cmd_eval(args):
    gold_ds = read_wsconll(args.gold)
    if not gold_ds.has_gold:
        raise FormatError(f"{args.gold} has no gold labels for some sentences")
    tokens, pred = read_predictions(args.pred, gold_ds.space)
    if len(pred) != len(gold_ds):
        raise FormatError(f"{len(pred)} predicted sentences but {len(gold_ds)} gold sentences")
    for i, (toks, s) in enumerate(zip(tokens, gold_ds.sentences)):
        if toks != s.tokens:
            raise FormatError(f"sentence {i}: predicted tokens do not match gold tokens")
    metrics = score_predictions([s.gold for s in gold_ds.sentences], pred, gold_ds.space)
    print(format_table(metrics))
    if args.json:
        _write_json(args.json, metrics)


def _load_reference(path, source_names):
    ref = _read_json(path)
    conf = ref.get("confusions", ref) if isinstance(ref, dict) else ref
    if isinstance(conf, list):
        if len(conf) != len(source_names):
            raise FormatError("reference holds a different number of sources")
        return dict(zip(source_names, conf))
    return conf


def cmd_inspect_sources(args):
    model = load_model(args.model)
    out = {"labels": list(model.space.labels), "sources": {}}
    ref = _load_reference(args.reference, model.source_names) if args.reference else None
    if ref is not None:
        out["correlation"] = {}
    for name, M in zip(model.source_names, model.Pi):
        views = {"raw": M, "clamp": export_matrix(M, "clamp"), "softmax": export_matrix(M, "softmax")}
        out["sources"][name] = {k: v.tolist() for k, v in views.items()}
        if ref is not None and name in ref:
            R = np.asarray(ref[name], dtype=np.float64)
            out["correlation"][name] = {mode: matrix_correlation(views[mode], R)
                                        for mode in ("clamp", "softmax")}
    if ref is not None and out["correlation"]:
        for mode in ("clamp", "softmax"):
            vals = [c[mode] for c in out["correlation"].values()]
            print(f"mean correlation ({mode}): {np.mean(vals):.4f}")
    if args.out:
        _write_json(args.out, out)
        print(f"wrote {len(model.source_names)} source matrices to {args.out}")
    else:
        print(json.dumps(out, indent=2))


def cmd_selfcheck(args):
    results = _selfcheck.run_all(args.n, args.seed)
    for r in results:
        print(r.summary())
    if not all(r.passed for r in results):
        raise RuntimeError("selfcheck failed")


def build_parser():
    p = _Parser(prog="weakcrf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic corpus with planted confusions")
    s.add_argument("--config", help="SynthConfig JSON (defaults if omitted)")
    s.add_argument("--out", required=True)
    s.add_argument("--sidecar", help="confusion-matrix JSON (default: <out>.confusions.json)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("mv", help="majority-vote predictions")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mv)

    s = sub.add_parser("train", help="train a model on weak labels")
    s.add_argument("--data", required=True)
    s.add_argument("--config", help="TrainConfig JSON; flags override it")
    s.add_argument("--out", required=True)
    s.add_argument("--history", help="loss history CSV (default: <out>.history.csv)")
    s.add_argument("--dev", help="gold-labeled .wsconll for early stopping")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    for name, typ in TRAIN_FLAGS.items():
        s.add_argument("--" + name.replace("_", "-"), type=typ, dest=name)
    s.add_argument("--no-weak-transition", action="store_true")
    s.add_argument("--no-crf-transition", action="store_true")
    s.add_argument("--freeze-source", action="store_true")
    s.add_argument("--crf-scale", type=float)
    s.add_argument("--emission-scale", type=float)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="decode a corpus with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--crf-scale", type=float)
    s.add_argument("--emission-scale", type=float)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="score predictions against gold")
    s.add_argument("--pred", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--json", help="also write metrics JSON here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect-sources", help="export learned source matrices")
    s.add_argument("--model", required=True)
    s.add_argument("--out")
    s.add_argument("--reference", help="reference confusion JSON (e.g. a synth sidecar)")
    s.set_defaults(func=cmd_inspect_sources)

    s = sub.add_parser("selfcheck", help="run the randomized oracle suites")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selfcheck)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FormatError, ModelFormatError, CorrelationError, json.JSONDecodeError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"failed: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())
