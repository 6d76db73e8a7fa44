"""Label alphabet, boundary state and BIO span extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

MISSING_MARK = "_"
UNKNOWN_GOLD_MARK = "?"
MISSING = -1

SCHEMES = ("BIO", "free")


class FormatError(ValueError):
    """Malformed input file or label."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Span(NamedTuple):
    entity_type: str
    start: int
    end: int


@dataclass(frozen=True)
class LabelSpace:
    """The K task labels.

    Index ``K`` (``begin_index``) is reserved for the chain start state and
    only ever appears as the source row of the transition matrix.  Missing
    annotations are encoded as ``missing_code`` (-1).
    """

    labels: tuple[str, ...]
    scheme: str = "free"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise FormatError("label space needs at least 2 labels")
        if any(not name for name in labels):
            raise FormatError("label names must be non-empty")
        if len(set(labels)) != len(labels):
            raise FormatError("duplicate label names")
        for name in labels:
            if name in (MISSING_MARK, UNKNOWN_GOLD_MARK) or any(c.isspace() for c in name):
                raise FormatError(f"invalid label name {name!r}")
        if self.scheme not in SCHEMES:
            raise FormatError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "BIO":
            for name in labels:
                if name != "O" and not (name[:2] in ("B-", "I-") and len(name) > 2):
                    raise FormatError(f"label {name!r} is not a BIO tag")
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def begin_index(self) -> int:
        return len(self.labels)

    @property
    def missing_code(self) -> int:
        return MISSING

    @property
    def fallback_index(self) -> int:
        """Label assigned when no evidence exists: ``O`` for BIO, else 0."""
        if self.scheme == "BIO" and "O" in self._index:
            return self._index["O"]
        return 0

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def name(self, index: int) -> str:
        if not 0 <= index < self.K:
            raise IndexError(f"label index {index} outside 0..{self.K - 1}")
        return self.labels[index]

    def names(self, indices: Sequence[int]) -> list[str]:
        return [self.name(int(i)) for i in indices]


def parse_label(name: str, space: LabelSpace, line: int | None = None) -> int:
    if name == MISSING_MARK:
        return MISSING
    try:
        return space.index(name)
    except KeyError:
        raise FormatError(f"unknown label {name!r}", line) from None


def extract_spans(tags: Sequence[int], space: LabelSpace) -> list[Span]:
    """Decode BIO tag indices into maximal spans.

    An ``I-X`` that does not continue an ``X`` span opens a new span.
    """
    if space.scheme != "BIO":
        raise ValueError("span extraction requires the BIO scheme")
    spans = []
    cur_type, cur_start = None, 0
    for pos, idx in enumerate(tags):
        name = space.name(int(idx))
        if name == "O":
            if cur_type is not None:
                spans.append(Span(cur_type, cur_start, pos))
            cur_type = None
            continue
        prefix, etype = name[:2], name[2:]
        if prefix == "I-" and cur_type == etype:
            continue
        if cur_type is not None:
            spans.append(Span(cur_type, cur_start, pos))
        cur_type, cur_start = etype, pos
    if cur_type is not None:
        spans.append(Span(cur_type, cur_start, len(tags)))
    return spans
