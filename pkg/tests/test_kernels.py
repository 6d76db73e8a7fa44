import os
import subprocess
import sys

import numpy as np
import pytest

from weakcrf import _pykernels, kernels

ck = pytest.importorskip("weakcrf._ckernels")


def instances(n, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        L, K = int(rng.integers(1, 12)), int(rng.integers(2, 7))
        yield rng.normal(scale=3, size=(L, K)), rng.normal(scale=3, size=(K + 1, K))


def test_chain_logz_agree():
    for U, T in instances(100):
        assert ck.chain_logz(U, T) == pytest.approx(_pykernels.chain_logz(U, T), rel=1e-12)


def test_forward_backward_agree():
    for U, T in instances(100, 1):
        a, b = ck.forward_backward(U, T), _pykernels.forward_backward(U, T)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)
        np.testing.assert_allclose(a[2], b[2], atol=1e-12)


def test_viterbi_agree_exactly():
    for U, T in instances(100, 2):
        pa, sa = ck.viterbi(U, T)
        pb, sb = _pykernels.viterbi(U, T)
        assert pa.tolist() == pb.tolist() and sa == sb


@pytest.mark.parametrize("mod", [_pykernels, ck])
def test_marginals_are_distributions(mod):
    for U, T in instances(20, 3):
        _, node, tmarg = mod.forward_backward(U, T)
        np.testing.assert_allclose(node.sum(axis=1), 1.0, atol=1e-12)
        # transition marginals: BEGIN row sums to 1, pair rows sum to L-1
        assert tmarg[-1].sum() == pytest.approx(1.0)
        assert tmarg[:-1].sum() == pytest.approx(len(U) - 1)


@pytest.mark.parametrize("mod", [_pykernels, ck])
def test_accepts_non_contiguous_input(mod):
    U = np.asfortranarray(np.random.default_rng(0).normal(size=(5, 3)))
    T = np.random.default_rng(1).normal(size=(4, 6))[:, ::2]
    assert mod.chain_logz(U, T) == pytest.approx(
        _pykernels.chain_logz(np.ascontiguousarray(U), np.ascontiguousarray(T)))


def test_backend_selection_env():
    code = "from weakcrf import kernels; print(kernels.BACKEND)"
    for value, expected in (("1", "python"), ("0", "cython"), ("", "cython")):
        env = dict(os.environ, WEAKCRF_PURE_PYTHON=value)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.strip()
        assert out == expected


def test_default_backend_is_compiled():
    if os.environ.get("WEAKCRF_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "cython"
