"""Randomized oracle suites: DP vs enumeration, gradients vs finite
differences, Viterbi vs enumeration."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import crf, oracles
from .emission import LogLinearBackbone

DP_TOL = 1e-8
GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-7
FD_STEP = 1e-5
# enumeration budget for one free-term check; denser grids get extra abstentions
MAX_FREE_CONFIGS = 3 ** 13


@dataclass
class SuiteResult:
    name: str
    n: int
    failures: int
    worst: float
    seconds: float

    @property
    def passed(self):
        return self.n > 0 and self.failures == 0

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: {self.n} instances, {self.failures} failures, "
                f"worst {self.worst:.3g}, {self.seconds:.2f}s")


def dp_instance(rng, L_range=(1, 4), K_range=(2, 3), J_range=(1, 3)):
    L = int(rng.integers(L_range[0], L_range[1] + 1))
    K = int(rng.integers(K_range[0], K_range[1] + 1))
    J = int(rng.integers(J_range[0], J_range[1] + 1))
    E, T, Pi, weak = oracles.random_instance(rng, L, K, J)
    obs = np.argwhere(weak != crf.MISSING)
    rng.shuffle(obs)
    while oracles.free_configurations(K, L, len(obs)) > MAX_FREE_CONFIGS:
        weak[tuple(obs[-1])] = crf.MISSING
        obs = obs[:-1]
    return E, T, Pi, weak


def dp_suite(n=200, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst, failures = 0.0, 0
    for _ in range(n):
        E, T, Pi, weak = dp_instance(rng)
        d1 = abs(crf.clamped_logsum(E, T, Pi, weak) - oracles.brute_clamped(E, T, Pi, weak))
        d2 = abs(crf.free_logz(E, T, Pi, weak) - oracles.brute_free(E, T, Pi, weak))
        worst = max(worst, d1, d2)
        failures += not (d1 < DP_TOL and d2 < DP_TOL)
    return SuiteResult("dp-vs-enumeration", n, failures, worst, time.perf_counter() - t0)


def _tokens(rng, L):
    vocab = ["the", "John", "Paris", "runs", "1999", "x-ray", "Ms.", "of"]
    return [vocab[i] for i in rng.integers(0, len(vocab), L)]


def gradient_errors(rng, hash_dim=16):
    """Worst FD mismatch over backbone, transition and source parameters
    for one random instance."""
    L = int(rng.integers(1, 5))
    K = int(rng.integers(2, 4))
    J = int(rng.integers(1, 4))
    _, T, Pi, weak = oracles.random_instance(rng, L, K, J)
    bb = LogLinearBackbone(K, hash_dim=hash_dim)
    bb.weights[:] = rng.uniform(-1, 1, bb.weights.shape)
    bb.bias[:] = rng.uniform(-1, 1, K)
    tokens = _tokens(rng, L)

    def loglik(weights=bb.weights, bias=bb.bias, T=T, Pi=Pi):
        probe = LogLinearBackbone(K, hash_dim, weights=weights, bias=bias)
        return crf.loglik_and_grad(probe.emit(tokens), T, Pi, weak).loglik

    res = crf.loglik_and_grad(bb.emit(tokens), T, Pi, weak)
    gb = bb.emit_backward(tokens, res.dE)
    checks = [
        (gb["weights"], lambda x: loglik(weights=x), bb.weights),
        (gb["bias"], lambda x: loglik(bias=x), bb.bias),
        (res.dT, lambda x: loglik(T=x), T),
        (res.dPi, lambda x: loglik(Pi=x), Pi),
    ]
    errs = []
    for analytic, f, x in checks:
        numeric = oracles.central_difference(f, x, FD_STEP)
        errs.append(oracles.gradient_mismatch(analytic, numeric, GRAD_RTOL, GRAD_ATOL))
    return max(errs)


def gradient_suite(n=20, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst, failures = 0.0, 0
    for _ in range(n):
        err = gradient_errors(rng)
        worst = max(worst, err)
        failures += not err < GRAD_RTOL
    return SuiteResult("gradient-vs-finite-differences", n, failures, worst,
                       time.perf_counter() - t0)


def viterbi_suite(n=200, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst, failures = 0.0, 0
    for _ in range(n):
        L = int(rng.integers(1, 6))
        K = int(rng.integers(2, 5))
        E = rng.uniform(-2, 2, (L, K))
        T = rng.uniform(-2, 2, (K + 1, K))
        path, score = crf.viterbi(E, T)
        bpath, bscore = oracles.brute_viterbi(E, T)
        worst = max(worst, abs(score - bscore))
        failures += not (score == bscore and np.array_equal(path, bpath))
    return SuiteResult("viterbi-vs-enumeration", n, failures, worst, time.perf_counter() - t0)


def run_all(n=200, seed=0) -> list[SuiteResult]:
    return [
        dp_suite(n, seed),
        gradient_suite(max(20, n // 10), seed + 1),
        viterbi_suite(n, seed + 2),
    ]
