import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_weak_dataset
from weakcrf.dataset import (
    Sentence,
    WeakDataset,
    format_wsconll,
    read_predictions,
    read_wsconll,
    write_predictions,
    write_wsconll,
)
from weakcrf.labels import MISSING, FormatError, LabelSpace

TWO_SENTENCES = (
    "#labels:\tO\tB-PER\tI-PER\n"
    "#sources:\ta\tb\n"
    "#scheme:\tBIO\n"
    "John\tB-PER\tB-PER\t_\n"
    "Smith\tI-PER\tI-PER\t_\n"
    "\n"
    "hi\tO\tO\tB-PER\n"
)


def write(tmp_path, text, name="d.wsconll"):
    p = tmp_path / name
    p.write_bytes(text.encode("utf-8"))
    return p


def test_read_two_sentences(tmp_path):
    ds = read_wsconll(write(tmp_path, TWO_SENTENCES))
    assert ds.n_sources == 2 and len(ds) == 2
    assert ds.source_names == ["a", "b"]
    assert ds.sentences[0].annotated_sources == frozenset({0})
    assert ds.sentences[1].annotated_sources == frozenset({0, 1})
    np.testing.assert_array_equal(ds.sentences[0].weak, [[1, MISSING], [2, MISSING]])
    np.testing.assert_array_equal(ds.sentences[0].gold, [1, 2])


def test_crlf_equals_lf(tmp_path):
    a = read_wsconll(write(tmp_path, TWO_SENTENCES, "a"))
    b = read_wsconll(write(tmp_path, TWO_SENTENCES.replace("\n", "\r\n"), "b"))
    assert a == b


@pytest.mark.parametrize("bad, line", [
    (TWO_SENTENCES.replace("Smith\tI-PER\tI-PER\t_", "Smith\tI-PER\tI-PER"), 5),
    (TWO_SENTENCES.replace("hi\tO\tO\tB-PER", "hi\tO\tO\tB-XYZ"), 7),
    (TWO_SENTENCES.replace("#sources:", "#srcs:"), 2),
    (TWO_SENTENCES.replace("Smith\tI-PER", "Smith\t?"), 4),
    (TWO_SENTENCES.replace("hi\tO\t", "hi\t_\t"), 7),
])
def test_format_errors_cite_line(tmp_path, bad, line):
    with pytest.raises(FormatError, match=f"line {line}:"):
        read_wsconll(write(tmp_path, bad))


def test_unknown_gold_reads_as_none(tmp_path):
    text = TWO_SENTENCES.replace("hi\tO\t", "hi\t?\t")
    ds = read_wsconll(write(tmp_path, text))
    assert ds.sentences[1].gold is None
    assert not ds.has_gold


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wsconll(tmp_path / "nope.wsconll")


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_with_and_without_gold(tmp_path, seed):
    ds = random_weak_dataset(np.random.default_rng(seed), K=4, J=3, n=15)
    write_wsconll(tmp_path / "x", ds)
    assert read_wsconll(tmp_path / "x") == ds
    write_wsconll(tmp_path / "y", ds, include_gold=False)
    back = read_wsconll(tmp_path / "y")
    assert all(s.gold is None for s in back.sentences)
    assert [s.weak.tolist() for s in back.sentences] == [s.weak.tolist() for s in ds.sentences]


def test_zero_sources_round_trip(tmp_path):
    space = LabelSpace(("a", "b"))
    ds = WeakDataset(space, [], [Sentence(["x", "y"], np.zeros((2, 0), int), [0, 1])])
    write_wsconll(tmp_path / "z", ds)
    assert read_wsconll(tmp_path / "z") == ds


def test_sentence_invariants():
    with pytest.raises(ValueError):
        Sentence([], np.zeros((0, 1)))
    with pytest.raises(ValueError):
        Sentence(["a"], [[0], [0]])
    with pytest.raises(ValueError):
        Sentence(["a"], [[0]], [MISSING])
    with pytest.raises(ValueError):
        WeakDataset(LabelSpace(("a", "b")), ["s"], [Sentence(["a"], [[2]])])
    with pytest.raises(ValueError):
        WeakDataset(LabelSpace(("a", "b")), ["s", "t"], [Sentence(["a"], [[0]])])


def test_prediction_round_trip_covers_every_label(tmp_path, bio_space):
    toks = [["a", "b", "c"], ["d", "e"]]
    tags = [np.array([0, 1, 2]), np.array([3, 4])]
    write_predictions(tmp_path / "p", toks, tags, bio_space)
    back_toks, back_tags = read_predictions(tmp_path / "p", bio_space)
    assert back_toks == toks
    assert [t.tolist() for t in back_tags] == [t.tolist() for t in tags]


def test_empty_predictions_file(tmp_path, bio_space):
    write_predictions(tmp_path / "p", [], [], bio_space)
    assert (tmp_path / "p").read_bytes() == b""
    assert read_predictions(tmp_path / "p", bio_space) == ([], [])


def test_prediction_writes_are_reproducible(tmp_path, bio_space):
    toks, tags = [["a", "b"]], [[1, 2]]
    write_predictions(tmp_path / "p1", toks, tags, bio_space)
    write_predictions(tmp_path / "p2", toks, tags, bio_space)
    assert (tmp_path / "p1").read_bytes() == (tmp_path / "p2").read_bytes()


def test_prediction_length_mismatch(tmp_path, bio_space):
    with pytest.raises(ValueError):
        write_predictions(tmp_path / "p", [["a", "b"]], [[0]], bio_space)


def test_atomic_write_leaves_no_temp(tmp_path, toy_dataset):
    write_wsconll(tmp_path / "d", toy_dataset)
    assert [p.name for p in tmp_path.iterdir()] == ["d"]


@given(st.data())
def test_annotated_sources_matches_grid(data):
    L = data.draw(st.integers(1, 5))
    J = data.draw(st.integers(0, 4))
    grid = data.draw(st.lists(st.lists(st.integers(-1, 2), min_size=J, max_size=J),
                              min_size=L, max_size=L))
    s = Sentence(["t"] * L, np.array(grid, dtype=np.int64).reshape(L, J))
    expect = {j for j in range(J) if any(row[j] != MISSING for row in grid)}
    assert s.annotated_sources == expect


def test_format_has_three_headers(toy_dataset):
    lines = format_wsconll(toy_dataset).splitlines()
    assert lines[0] == "#labels:\tO\tB-PER\tI-PER\tB-LOC\tI-LOC"
    assert lines[1] == "#sources:\tw1\tw2"
    assert lines[2] == "#scheme:\tBIO"
    assert lines[3] == "John\tB-PER\tB-PER\tB-PER"
