import json
import math

import numpy as np
import pytest

from weakcrf import trainer
from weakcrf.baselines import majority_vote_all, train_supervised
from weakcrf.emission import LogLinearBackbone, MLPBackbone
from weakcrf.labels import LabelSpace
from weakcrf.optim import SGD, Adam, make_optimizer
from weakcrf.sources import SourceInitConfig, init_weak_matrices
from weakcrf.synthetic import SynthConfig, generate
from weakcrf.trainer import (
    ModelFormatError,
    ModelParams,
    TrainConfig,
    TrainingError,
    _Problem,
    initialize,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    train,
)


@pytest.fixture(scope="module")
def synth():
    cfg = SynthConfig.planted(K=3, J=4, n_sentences=120, length_range=(4, 8), missing_rate=0.3,
                              vocab_size=60, block_size=10, seed=2)
    return generate(cfg)[0]


BASE = TrainConfig(epochs=5, batch_size=16, backbone_config={"hash_dim": 4096})


def same_params(a: ModelParams, b: ModelParams):
    return (a.T.tobytes() == b.T.tobytes() and a.Pi.tobytes() == b.Pi.tobytes()
            and all(a.backbone.params[k].tobytes() == b.backbone.params[k].tobytes()
                    for k in a.backbone.params))


# -- config -----------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    dict(batch_size=1), dict(lr_crf=0), dict(lr_backbone=-1), dict(lr_weak=-1e-3),
    dict(rho=0), dict(optimizer="rmsprop"), dict(init_variant="random"),
    dict(backbone="bert"), dict(threads=0), dict(epochs=-1), dict(crf_scale=math.inf),
])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


def test_config_warns_when_weak_rate_exceeds_crf_rate():
    with pytest.warns(UserWarning, match="lr_weak"):
        TrainConfig(lr_weak=0.1, lr_crf=0.01)


def test_config_dict_round_trip():
    cfg = TrainConfig(epochs=3, freeze_source=True, backbone_config={"hash_dim": 8})
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"epochz": 3})


# -- training ---------------------------------------------------------------------

def test_loss_decreases(synth):
    _, hist = train(synth, BASE)
    losses = [h["mean_neg_loglik"] for h in hist]
    assert len(hist) == BASE.epochs + 1
    assert losses[5] < losses[0]
    assert all(math.isfinite(x) for x in losses)


def test_zero_epochs_returns_initialization(synth):
    cfg = BASE.replace(epochs=0, pretrain_epochs=0)
    params, hist = train(synth, cfg)
    assert (params.T == 0).all() and (params.backbone.weights == 0).all()
    expected = init_weak_matrices(synth, majority_vote_all(synth), SourceInitConfig(cfg.rho))
    np.testing.assert_array_equal(params.Pi, expected)
    assert [h["epoch"] for h in hist] == [0]


def test_freeze_source_keeps_pi(synth):
    cfg = BASE.replace(epochs=2, freeze_source=True)
    _, _, _, Pi0 = initialize(synth, cfg, np.random.default_rng(cfg.seed))
    params, _ = train(synth, cfg)
    assert params.Pi.tobytes() == Pi0.tobytes()


def test_zero_weak_rate_matches_freeze(synth):
    a, ha = train(synth, BASE.replace(epochs=2, lr_weak=0.0, optimizer="sgd"))
    b, hb = train(synth, BASE.replace(epochs=2, freeze_source=True, optimizer="sgd"))
    assert a.Pi.tobytes() == b.Pi.tobytes()
    assert [h["mean_neg_loglik"] for h in ha] == [h["mean_neg_loglik"] for h in hb]


def test_no_crf_transition_keeps_t_zero(synth):
    params, _ = train(synth, BASE.replace(epochs=2, no_crf_transition=True))
    assert (params.T == 0).all()


def test_no_weak_transition_equals_supervised_on_mv(synth):
    cfg = BASE.replace(epochs=3, no_weak_transition=True)
    a, ha = train(synth, cfg)
    b, hb = train_supervised(synth, majority_vote_all(synth), cfg,
                             epochs=cfg.pretrain_epochs + cfg.epochs)
    assert [h["mean_neg_loglik"] for h in ha] == [h["mean_neg_loglik"] for h in hb]
    assert a.T.tobytes() == b.T.tobytes()


def test_deterministic_given_seed(synth):
    a, ha = train(synth, BASE.replace(epochs=2))
    b, hb = train(synth, BASE.replace(epochs=2))
    assert same_params(a, b)
    assert [h["mean_neg_loglik"] for h in ha] == [h["mean_neg_loglik"] for h in hb]


def test_threads_do_not_change_results(synth):
    a, _ = train(synth, BASE.replace(epochs=2, threads=1))
    b, _ = train(synth, BASE.replace(epochs=2, threads=4))
    assert same_params(a, b)


def test_batch_order_only_reassociates(synth):
    cfg = BASE.replace(epochs=0, pretrain_epochs=0)
    _, backbone, T, Pi = initialize(synth, cfg, np.random.default_rng(0))
    problem = _Problem(synth, backbone, T, Pi, None, 1)
    idx = np.arange(16)
    loss_a, gb_a, gT_a, gPi_a = problem.batch_grads(idx)
    loss_b, gb_b, gT_b, gPi_b = problem.batch_grads(idx[::-1])
    assert loss_b == pytest.approx(loss_a, rel=1e-6)
    np.testing.assert_allclose(gT_b, gT_a, rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(gPi_b, gPi_a, rtol=1e-6, atol=1e-12)


@pytest.mark.parametrize("variant", ["uniform_diag", "weak_classifier"])
def test_init_variants(synth, variant):
    cfg = BASE.replace(epochs=0, init_variant=variant)
    params, _ = train(synth, cfg)
    if variant == "uniform_diag":
        np.testing.assert_array_equal(params.Pi[0], np.eye(3) / 3)
    else:
        assert (params.backbone.weights != 0).any()


def test_mlp_backbone_trains(synth):
    cfg = BASE.replace(epochs=3, backbone="tiny-mlp",
                       backbone_config={"emb_dim": 8, "hidden": 8})
    params, hist = train(synth, cfg)
    assert isinstance(params.backbone, MLPBackbone)
    assert hist[-1]["mean_neg_loglik"] < hist[0]["mean_neg_loglik"]


def test_early_stopping_with_dev(synth):
    cfg = BASE.replace(epochs=6, early_stopping_patience=1)
    params, hist = train(synth, cfg, dev=synth)
    assert len(hist) <= 7 and params is not None


def test_empty_dataset_rejected(synth):
    from weakcrf.dataset import WeakDataset
    with pytest.raises(ValueError):
        train(WeakDataset(synth.space, synth.source_names, []), BASE)


def test_non_finite_loss_aborts(synth):
    cfg = BASE.replace(epochs=1, pretrain_epochs=0)
    _, backbone, T, Pi = initialize(synth, cfg, np.random.default_rng(0))
    T[0, 0] = np.nan
    problem = _Problem(synth, backbone, T, Pi, None, 1)
    with pytest.raises(TrainingError, match="sentence 0"):
        problem.mean_loss()


# -- persistence ------------------------------------------------------------------

def random_params(rng, backbone="log-linear"):
    space = LabelSpace(("O", "B-X", "I-X"), "BIO")
    if backbone == "log-linear":
        bb = LogLinearBackbone(3, 32)
        bb.weights[:] = rng.normal(size=bb.weights.shape)
        bb.bias[:] = rng.normal(size=3)
    else:
        bb = MLPBackbone(3, ["a", "b"], emb_dim=3, hidden=4, rng=rng)
    return ModelParams(bb, rng.normal(size=(4, 3)), rng.normal(size=(2, 3, 3)), space,
                       ["s1", "s2"], 0.5, 2.0)


@pytest.mark.parametrize("kind", ["log-linear", "tiny-mlp"])
def test_save_load_bit_exact(tmp_path, kind):
    p = random_params(np.random.default_rng(1), kind)
    save_model(p, tmp_path / "m.json")
    q = load_model(tmp_path / "m.json")
    assert same_params(p, q)
    assert (q.space, q.source_names, q.crf_scale, q.emission_scale) == (
        p.space, p.source_names, 0.5, 2.0)
    assert q.decode(["a", "b", "c"]).tolist() == p.decode(["a", "b", "c"]).tolist()


def test_model_file_layout(tmp_path):
    save_model(random_params(np.random.default_rng(2)), tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["format_version"] == 1
    for key in ("labels", "scheme", "sources", "backbone", "crf_transition", "weak_matrices"):
        assert key in d
    assert set(d["backbone"]) >= {"kind", "feature_config", "weights"}


def test_label_count_mismatch_rejected():
    d = model_to_dict(random_params(np.random.default_rng(3)))
    d["labels"] = ["O", "B-X", "I-X", "B-Y"]
    with pytest.raises(ModelFormatError):
        model_from_dict(d)


def test_version_and_corruption_rejected(tmp_path):
    d = model_to_dict(random_params(np.random.default_rng(4)))
    with pytest.raises(ModelFormatError, match="format_version"):
        model_from_dict(dict(d, format_version=2))
    bad = json.loads(json.dumps(d))
    bad["crf_transition"]["data"] = "!!!"
    with pytest.raises(ModelFormatError):
        model_from_dict(bad)
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "x.json")
    with pytest.raises(ModelFormatError):
        model_from_dict({k: v for k, v in d.items() if k != "weak_matrices"})


def test_inference_scales_apply():
    p = random_params(np.random.default_rng(5))
    toks = ["a", "b", "c", "d"]
    E = p.backbone.emit(toks)
    from weakcrf.crf import viterbi
    assert p.decode(toks).tolist() == viterbi(2.0 * E, 0.5 * p.T)[0].tolist()


# -- optimizers -------------------------------------------------------------------

def test_sgd_step():
    x = np.array([1.0, 2.0])
    SGD(0.5).step({"x": x}, {"x": np.array([2.0, -2.0])})
    np.testing.assert_array_equal(x, [0.0, 3.0])


def test_adam_first_step_is_lr_sign():
    x = np.array([1.0, 2.0])
    Adam(0.1).step({"x": x}, {"x": np.array([3.0, -0.5])})
    np.testing.assert_allclose(x, [0.9, 2.1], atol=1e-7)


def test_adam_minimizes_quadratic():
    x = np.array([5.0, -3.0])
    opt = make_optimizer("adam", 0.1)
    for _ in range(500):
        opt.step({"x": x}, {"x": 2 * x})
    assert np.abs(x).max() < 1e-2
    with pytest.raises(ValueError):
        make_optimizer("lbfgs", 0.1)
