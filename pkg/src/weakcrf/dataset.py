"""Reading and writing the multi-source ``.wsconll`` format.

Layout::

    #labels:<TAB>O<TAB>B-PER<TAB>I-PER
    #sources:<TAB>w1<TAB>w2
    #scheme:<TAB>BIO
    John<TAB>B-PER<TAB>B-PER<TAB>_
    runs<TAB>O<TAB>O<TAB>_

    ...

Each body line is ``token, gold, y_1 .. y_J``.  ``_`` marks a source that did
not label the token, ``?`` marks unknown gold.  Sentences are separated by a
blank line.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .labels import (
    MISSING,
    MISSING_MARK,
    UNKNOWN_GOLD_MARK,
    FormatError,
    LabelSpace,
    parse_label,
)

_UMASK = os.umask(0)
os.umask(_UMASK)


@dataclass(eq=False)
class Sentence:
    tokens: list[str]
    weak: np.ndarray  # (L, J) int, MISSING where unlabeled
    gold: np.ndarray | None = None

    def __post_init__(self):
        self.tokens = list(self.tokens)
        L = len(self.tokens)
        if L == 0:
            raise ValueError("empty sentence")
        weak = np.asarray(self.weak, dtype=np.int64)
        if weak.ndim == 1 and weak.size == 0:
            weak = weak.reshape(L, 0)
        if weak.ndim != 2 or weak.shape[0] != L:
            raise ValueError(f"weak grid shape {weak.shape} does not match {L} tokens")
        self.weak = weak
        if self.gold is not None:
            gold = np.asarray(self.gold, dtype=np.int64)
            if gold.shape != (L,):
                raise ValueError("gold length does not match tokens")
            if (gold < 0).any():
                raise ValueError("gold labels may not be missing")
            self.gold = gold

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def n_sources(self) -> int:
        return self.weak.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return self.weak != MISSING

    @property
    def annotated_sources(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.observed.any(axis=0)).tolist())

    def __eq__(self, other):
        if not isinstance(other, Sentence):
            return NotImplemented
        if self.tokens != other.tokens or not np.array_equal(self.weak, other.weak):
            return False
        if (self.gold is None) != (other.gold is None):
            return False
        return self.gold is None or np.array_equal(self.gold, other.gold)


@dataclass(eq=True)
class WeakDataset:
    space: LabelSpace
    source_names: list[str]
    sentences: list[Sentence]

    def __post_init__(self):
        self.source_names = list(self.source_names)
        if len(set(self.source_names)) != len(self.source_names):
            raise ValueError("duplicate source names")
        J, K = len(self.source_names), self.space.K
        for i, s in enumerate(self.sentences):
            if s.n_sources != J:
                raise ValueError(f"sentence {i} has {s.n_sources} sources, expected {J}")
            if ((s.weak < MISSING) | (s.weak >= K)).any():
                raise ValueError(f"sentence {i} has weak labels outside the label space")
            if s.gold is not None and (s.gold >= K).any():
                raise ValueError(f"sentence {i} has gold labels outside the label space")

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def n_sources(self) -> int:
        return len(self.source_names)

    @property
    def has_gold(self) -> bool:
        return bool(self.sentences) and all(s.gold is not None for s in self.sentences)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.chmod(tmp, 0o666 & ~_UMASK)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(line: str, key: str, lineno: int) -> list[str]:
    parts = line.split("\t")
    if parts[0] != f"#{key}:":
        raise FormatError(f"expected '#{key}:' header", lineno)
    return parts[1:]


def _blocks(lines: Iterable[tuple[int, str]]):
    block = []
    for lineno, line in lines:
        if line.strip() == "":
            if block:
                yield block
                block = []
            continue
        block.append((lineno, line))
    if block:
        yield block


def read_wsconll(path) -> WeakDataset:
    with open(path, encoding="utf-8") as f:
        raw = f.read()
    lines = [(n, line.rstrip("\r")) for n, line in enumerate(raw.split("\n"), start=1)]
    if len(lines) < 3:
        raise FormatError("missing header lines", len(lines))
    labels = _header(lines[0][1], "labels", 1)
    sources = _header(lines[1][1], "sources", 2)
    scheme = _header(lines[2][1], "scheme", 3)
    if len(scheme) != 1:
        raise FormatError("scheme header takes exactly one value", 3)
    sources = [s for s in sources if s != ""]
    try:
        space = LabelSpace(tuple(labels), scheme[0])
    except FormatError as exc:
        raise FormatError(f"bad label header: {exc}", 1) from None
    J = len(sources)
    n_cols = 2 + J

    sentences = []
    for block in _blocks(lines[3:]):
        tokens, gold, weak = [], [], []
        for lineno, line in block:
            cols = line.split("\t")
            if len(cols) != n_cols:
                raise FormatError(f"expected {n_cols} columns, found {len(cols)}", lineno)
            if cols[0] == "":
                raise FormatError("empty token", lineno)
            tokens.append(cols[0])
            if cols[1] == UNKNOWN_GOLD_MARK:
                gold.append(None)
            elif cols[1] == MISSING_MARK:
                raise FormatError("gold column uses '?' for unknown, not '_'", lineno)
            else:
                gold.append(parse_label(cols[1], space, lineno))
            weak.append([parse_label(c, space, lineno) for c in cols[2:]])
        known = [g is not None for g in gold]
        if any(known) and not all(known):
            raise FormatError("gold must be given for all or none of a sentence's tokens",
                              block[0][0])
        sentences.append(Sentence(
            tokens,
            np.array(weak, dtype=np.int64).reshape(len(tokens), J),
            np.array(gold, dtype=np.int64) if all(known) else None,
        ))
    return WeakDataset(space, sources, sentences)


def format_wsconll(ds: WeakDataset, include_gold: bool = True) -> str:
    space = ds.space
    out = [
        "\t".join(["#labels:", *space.labels]),
        "\t".join(["#sources:", *ds.source_names]),
        "\t".join(["#scheme:", space.scheme]),
    ]
    body = []
    for s in ds.sentences:
        rows = []
        for pos, token in enumerate(s.tokens):
            gold = space.name(s.gold[pos]) if include_gold and s.gold is not None else UNKNOWN_GOLD_MARK
            weak = [MISSING_MARK if y == MISSING else space.name(y) for y in s.weak[pos]]
            rows.append("\t".join([token, gold, *weak]))
        body.append("\n".join(rows))
    text = "\n".join(out) + "\n"
    if body:
        text += "\n\n".join(body) + "\n"
    return text


def write_wsconll(path, ds: WeakDataset, include_gold: bool = True) -> None:
    atomic_write_text(path, format_wsconll(ds, include_gold))


def write_predictions(path, tokens: Sequence[Sequence[str]], tags: Sequence[Sequence[int]],
                      space: LabelSpace) -> None:
    """Two-column ``token<TAB>tag`` file, one blank line between sentences."""
    if len(tokens) != len(tags):
        raise ValueError(f"{len(tokens)} sentences but {len(tags)} tag sequences")
    blocks = []
    for i, (toks, seq) in enumerate(zip(tokens, tags)):
        if len(toks) != len(seq):
            raise ValueError(f"sentence {i}: {len(toks)} tokens but {len(seq)} tags")
        blocks.append("\n".join(f"{t}\t{space.name(int(y))}" for t, y in zip(toks, seq)))
    atomic_write_text(path, "\n\n".join(blocks) + "\n" if blocks else "")


def read_predictions(path, space: LabelSpace) -> tuple[list[list[str]], list[np.ndarray]]:
    with open(path, encoding="utf-8") as f:
        raw = f.read()
    lines = [(n, line.rstrip("\r")) for n, line in enumerate(raw.split("\n"), start=1)]
    tokens, tags = [], []
    for block in _blocks(lines):
        toks, seq = [], []
        for lineno, line in block:
            cols = line.split("\t")
            if len(cols) != 2:
                raise FormatError(f"expected 2 columns, found {len(cols)}", lineno)
            label = parse_label(cols[1], space, lineno)
            if label == MISSING:
                raise FormatError("predictions may not be missing", lineno)
            toks.append(cols[0])
            seq.append(label)
        tokens.append(toks)
        tags.append(np.array(seq, dtype=np.int64))
    return tokens, tags
