"""Dataset loading, tokenization, corpus statistics and the stratified resplit."""

from __future__ import annotations

import csv
import enum
import hashlib
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised for unreadable or malformed dataset files."""


class LabelError(DatasetError):
    pass


class DomainError(ValueError):
    """Raised when an operation's input is outside its domain."""


class Label(enum.IntEnum):
    REAL = 0
    FAKE = 1

    @classmethod
    def parse(cls, value: str) -> "Label":
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise LabelError(f"unknown label {value!r}") from None


class Pipeline(str, enum.Enum):
    CLASSIC = "classic"
    RAW = "raw"


@dataclass(frozen=True)
class LabeledPost:
    id: str
    text: str
    label: Label


@dataclass
class Corpus:
    posts: list[LabeledPost] = field(default_factory=list)
    name: str = "train"

    def __post_init__(self):
        ids = [p.id for p in self.posts]
        if len(set(ids)) != len(ids):
            raise DomainError(f"duplicate post ids in corpus {self.name!r}")

    def __len__(self) -> int:
        return len(self.posts)

    @property
    def texts(self) -> list[str]:
        return [p.text for p in self.posts]

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(p.label) for p in self.posts], dtype=np.int64)


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    pipeline: Pipeline

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class CorpusStats:
    sample_count: int
    fake_count: int
    real_count: int
    avg_words: float
    max_words: int
    min_words: int

    def format(self) -> str:
        return (
            f"samples {self.sample_count}  fake {self.fake_count}  real {self.real_count}\n"
            f"words   avg {self.avg_words:.3f}  max {self.max_words}  min {self.min_words}"
        )


@dataclass(frozen=True)
class SplitSpec:
    ratio: float = 0.9
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise DomainError(f"split ratio must lie strictly in (0, 1), got {self.ratio}")


# Characters kept by the CLASSIC pipeline; everything else becomes a space.
DEFAULT_KEEP = "a-z0-9#@'"


@lru_cache(maxsize=None)
def _strip_pattern(keep: str) -> re.Pattern:
    return re.compile(f"[^{keep}]+")


def _stopword_text() -> str:
    return resources.files("veritext").joinpath("data/stopwords_en.txt").read_text("utf-8")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    return frozenset(w for w in _stopword_text().split() if w)


def stopword_hash() -> str:
    """SHA-256 of the shipped stopword list, recorded in model artifacts."""
    return hashlib.sha256(_stopword_text().encode("utf-8")).hexdigest()


def preprocess(text: str, pipeline: Pipeline | str, keep: str = DEFAULT_KEEP) -> TokenSequence:
    pipeline = Pipeline(pipeline)
    if pipeline is Pipeline.RAW:
        return TokenSequence(tuple(text.split()), pipeline)
    cleaned = _strip_pattern(keep).sub(" ", text.lower())
    stop = stopwords()
    return TokenSequence(tuple(t for t in cleaned.split() if t not in stop), pipeline)


def tokenize_all(texts, pipeline: Pipeline | str, keep: str = DEFAULT_KEEP) -> list[TokenSequence]:
    return [preprocess(t, pipeline, keep) for t in texts]


_COLUMN_ALIASES = {
    "id": ("id",),
    "text": ("tweet", "text"),
    "label": ("label",),
}


def _resolve_columns(header: list[str], path: Path, need_label: bool) -> dict[str, int]:
    lowered = [h.strip().lower() for h in header]
    cols = {}
    for key, names in _COLUMN_ALIASES.items():
        for name in names:
            if name in lowered:
                cols[key] = lowered.index(name)
                break
        else:
            if key == "label" and not need_label:
                continue
            raise DatasetError(f"{path}: header has no {key!r} column (got {header})")
    return cols


def _sniff_format(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt.upper()
    return "TSV" if path.suffix.lower() in (".tsv", ".tab") else "CSV"


def read_rows(path, fmt: str | None = None, need_label: bool = True):
    """Yield ``(line_number, id, text, label_or_None)`` from a dataset file."""
    path = Path(path)
    delimiter = "\t" if _sniff_format(path, fmt) == "TSV" else ","
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open dataset {path}: {exc.strerror}") from exc
    with handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: file is empty, expected a header row") from None
        cols = _resolve_columns(header, path, need_label)
        width = len(header)
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != width:
                raise DatasetError(
                    f"{path}:{line}: expected {width} columns, found {len(row)}"
                )
            label = row[cols["label"]] if "label" in cols else None
            yield line, row[cols["id"]], row[cols["text"]], label


def load_dataset(path, fmt: str | None = None, name: str | None = None) -> Corpus:
    """Read a TSV/CSV file with ``id``, ``tweet`` and ``label`` columns."""
    path = Path(path)
    posts = []
    for line, post_id, text, label in read_rows(path, fmt):
        try:
            parsed = Label.parse(label)
        except LabelError as exc:
            raise LabelError(f"{path}:{line}: {exc}") from None
        if not text.strip():
            raise DatasetError(f"{path}:{line}: post {post_id!r} has empty text")
        posts.append(LabeledPost(post_id, text, parsed))
    return Corpus(posts, name or path.stem)


def corpus_stats(corpus: Corpus, pipeline: Pipeline | str = Pipeline.RAW) -> CorpusStats:
    if not corpus.posts:
        raise DomainError("corpus_stats needs a non-empty corpus")
    counts = np.array([len(preprocess(p.text, pipeline)) for p in corpus.posts])
    labels = corpus.labels
    fake = int((labels == Label.FAKE).sum())
    return CorpusStats(
        sample_count=len(corpus),
        fake_count=fake,
        real_count=len(corpus) - fake,
        avg_words=float(counts.mean()),
        max_words=int(counts.max()),
        min_words=int(counts.min()),
    )


def _first_side_size(ratio: float, n: int) -> int:
    # Guard against 0.9 * 4480 evaluating to 4031.999...
    return int(math.floor(ratio * n + 1e-9))


def combine_and_split(train: Corpus, validation: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Pool two corpora and resplit them per label with a seeded shuffle.

    Ids are namespaced by source corpus (``train:17``) so the official files,
    which both number their rows from 1, can be merged.
    """
    pooled = [
        LabeledPost(f"{source.name}:{p.id}", p.text, p.label)
        for source in (train, validation)
        for p in source.posts
    ]
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    first_idx, second_idx = [], []
    for label in (Label.FAKE, Label.REAL):
        members = np.array([i for i, p in enumerate(pooled) if p.label is label], dtype=np.int64)
        k = _first_side_size(spec.ratio, len(members))
        if k == 0 or k == len(members):
            raise DomainError(
                f"ratio {spec.ratio} leaves an empty side for label {label.name} "
                f"({len(members)} posts)"
            )
        order = members[rng.permutation(len(members))]
        first_idx.extend(order[:k].tolist())
        second_idx.extend(order[k:].tolist())
    first = Corpus([pooled[i] for i in sorted(first_idx)], "train")
    second = Corpus([pooled[i] for i in sorted(second_idx)], "validation")
    return first, second
