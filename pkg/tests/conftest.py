import numpy as np
import pytest
from hypothesis import settings

from weakcrf.dataset import Sentence, WeakDataset
from weakcrf.labels import MISSING, LabelSpace

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(criterion, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"{status} criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bio_space():
    return LabelSpace(("O", "B-PER", "I-PER", "B-LOC", "I-LOC"), "BIO")


@pytest.fixture
def toy_dataset(bio_space):
    """Two sentences, two sources, gold present."""
    sp = bio_space
    s1 = Sentence(
        ["John", "lives", "in", "Paris"],
        [[sp.index("B-PER"), sp.index("B-PER")],
         [sp.index("O"), MISSING],
         [sp.index("O"), sp.index("O")],
         [sp.index("B-LOC"), sp.index("B-PER")]],
        [sp.index("B-PER"), sp.index("O"), sp.index("O"), sp.index("B-LOC")],
    )
    s2 = Sentence(
        ["Mary", "Smith", "left"],
        [[sp.index("B-PER"), MISSING],
         [sp.index("I-PER"), MISSING],
         [sp.index("O"), MISSING]],
        [sp.index("B-PER"), sp.index("I-PER"), sp.index("O")],
    )
    return WeakDataset(sp, ["w1", "w2"], [s1, s2])


def random_weak_dataset(rng, K=3, J=3, n=20, length=(2, 6), missing=0.3, gold=True):
    space = LabelSpace(tuple(f"L{k}" for k in range(K)), "free")
    vocab = [f"tok{i}" for i in range(12)]
    sentences = []
    for _ in range(n):
        L = int(rng.integers(length[0], length[1] + 1))
        weak = rng.integers(0, K, (L, J))
        weak[rng.random((L, J)) < missing] = MISSING
        g = rng.integers(0, K, L) if gold else None
        sentences.append(Sentence([vocab[i] for i in rng.integers(0, len(vocab), L)], weak, g))
    return WeakDataset(space, [f"s{j}" for j in range(J)], sentences)
