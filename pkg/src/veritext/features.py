"""Document vectorizers: smoothed tf-idf and mean-pooled skip-gram embeddings."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np
import scipy.sparse as sp

from .corpus import DomainError


@dataclass
class Vocabulary:
    tokens: list[str]
    doc_freq: np.ndarray
    n_docs: int
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.doc_freq = np.asarray(self.doc_freq, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @classmethod
    def build(cls, docs: Sequence[Iterable[str]], min_count: int = 1, by: str = "df") -> "Vocabulary":
        """Collect tokens seen at least ``min_count`` times.

        ``by="df"`` counts documents containing the token, ``by="tf"`` counts
        every occurrence. Tokens are indexed in sorted order.
        """
        df: Counter = Counter()
        tf: Counter = Counter()
        for doc in docs:
            doc = list(doc)
            df.update(set(doc))
            tf.update(doc)
        counts = df if by == "df" else tf
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(kept, np.array([df[t] for t in kept], dtype=np.int64), len(docs))

    def ids(self, doc: Iterable[str]) -> list[int]:
        index = self.index
        return [index[t] for t in doc if t in index]


@dataclass(frozen=True)
class SparseVector:
    dimension: int
    indices: np.ndarray
    values: np.ndarray

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))


def sparse_rows(vectors: Sequence[SparseVector]) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR matrix."""
    if not vectors:
        raise DomainError("cannot stack an empty list of vectors")
    dim = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v.indices) for v in vectors])
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def _count_vector(vocab: Vocabulary, doc: Iterable[str]) -> tuple[np.ndarray, np.ndarray]:
    ids = vocab.ids(doc)
    if not ids:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    idx, counts = np.unique(np.asarray(ids, dtype=np.int64), return_counts=True)
    return idx, counts.astype(np.float64)


def count_vector(vocab: Vocabulary, doc: Iterable[str]) -> SparseVector:
    """Raw term counts over ``vocab``; the input expected by Naive Bayes."""
    idx, counts = _count_vector(vocab, doc)
    return SparseVector(len(vocab), idx, counts)


def count_matrix(vocab: Vocabulary, docs: Sequence[Iterable[str]]) -> sp.csr_matrix:
    return sparse_rows([count_vector(vocab, d) for d in docs])


@dataclass
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)


def smooth_idf(doc_freq: np.ndarray, n_docs: int) -> np.ndarray:
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(doc_freq, dtype=np.float64))) + 1.0


def fit_tfidf(docs: Sequence[Iterable[str]], min_count: int = 1) -> TfidfModel:
    if len(docs) == 0:
        raise DomainError("fit_tfidf needs at least one document")
    vocab = Vocabulary.build(docs, min_count=min_count, by="df")
    return TfidfModel(vocab, smooth_idf(vocab.doc_freq, vocab.n_docs))


def transform_tfidf(model: TfidfModel, doc: Iterable[str]) -> SparseVector:
    idx, counts = _count_vector(model.vocabulary, doc)
    if not len(idx):
        return SparseVector(model.dimension, idx, counts)
    weights = counts * model.idf[idx]
    return SparseVector(model.dimension, idx, weights / np.sqrt(np.dot(weights, weights)))


def tfidf_matrix(model: TfidfModel, docs: Sequence[Iterable[str]]) -> sp.csr_matrix:
    return sparse_rows([transform_tfidf(model, d) for d in docs])


# ---------------------------------------------------------------------------
# skip-gram with negative sampling


@dataclass
class EmbeddingTable:
    vocabulary: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    epoch_loss: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        return self.input_vectors[self.vocabulary.index[token]]


@dataclass(frozen=True)
class Word2VecParams:
    dim: int = 300
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_count: int = 2
    seed: int = 42


def skipgram_pairs(sentences: Sequence[np.ndarray], window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (center, context) index pairs within ``window`` positions.

    Pairs are ordered by center position in the concatenated corpus, then by
    context offset from left to right.
    """
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    if lengths.sum() == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    flat = np.concatenate([np.asarray(s, dtype=np.int64) for s in sentences if len(s)])
    sent_id = np.repeat(np.arange(len(sentences)), lengths)
    pos = np.arange(len(flat))
    centers, contexts, keys = [], [], []
    for off in range(-window, window + 1):
        if off == 0:
            continue
        if off > 0:
            src, dst = pos[:-off], pos[off:]
        else:
            src, dst = pos[-off:], pos[:off]
        same = sent_id[src] == sent_id[dst]
        centers.append(src[same])
        contexts.append(dst[same])
        keys.append(np.full(int(same.sum()), off + window))
    c_pos = np.concatenate(centers)
    x_pos = np.concatenate(contexts)
    order = np.lexsort((np.concatenate(keys), c_pos))
    return flat[c_pos[order]], flat[x_pos[order]]


@numba.njit(cache=True)
def _sgns_epoch(w_in, w_out, centers, contexts, negatives, lrs):
    n_pairs = centers.shape[0]
    k = negatives.shape[1]
    dim = w_in.shape[1]
    grad = np.empty(dim)
    total = 0.0
    for p in range(n_pairs):
        c = centers[p]
        lr = lrs[p]
        grad[:] = 0.0
        for j in range(k + 1):
            if j == 0:
                t = contexts[p]
                label = 1.0
            else:
                t = negatives[p, j - 1]
                if t == contexts[p]:
                    continue
                label = 0.0
            dot = 0.0
            for d in range(dim):
                dot += w_in[c, d] * w_out[t, d]
            if dot > 30.0:
                f = 1.0
            elif dot < -30.0:
                f = 0.0
            else:
                f = 1.0 / (1.0 + math.exp(-dot))
            if label == 1.0:
                total -= math.log(max(f, 1e-300))
            else:
                total -= math.log(max(1.0 - f, 1e-300))
            g = (label - f) * lr
            for d in range(dim):
                grad[d] += g * w_out[t, d]
                w_out[t, d] += g * w_in[c, d]
        for d in range(dim):
            w_in[c, d] += grad[d]
    return total / max(n_pairs, 1)


def noise_distribution(counts: np.ndarray, power: float = 0.75) -> np.ndarray:
    weights = np.asarray(counts, dtype=np.float64) ** power
    return weights / weights.sum()


def sgns_loss(table: EmbeddingTable, centers, contexts, negatives) -> float:
    """Mean negative-sampling loss of ``table`` on a fixed batch of pairs."""
    w_in, w_out = table.input_vectors, table.output_vectors
    h = w_in[centers]
    pos = np.einsum("ij,ij->i", h, w_out[contexts])
    neg = np.einsum("ij,ikj->ik", h, w_out[negatives])
    keep = negatives != np.asarray(contexts)[:, None]
    loss = np.logaddexp(0.0, -pos) + (np.logaddexp(0.0, neg) * keep).sum(axis=1)
    return float(loss.mean())


def train_word2vec(docs: Sequence[Iterable[str]], params: Word2VecParams = Word2VecParams()) -> EmbeddingTable:
    """Skip-gram with negative sampling, trained sequentially for determinism.

    The learning rate decays linearly from ``lr`` to ``lr / 10`` across all
    pairs of all epochs. Negatives come from the unigram distribution raised
    to 0.75; a negative that equals the true context is skipped.
    """
    docs = [list(d) for d in docs]
    vocab = Vocabulary.build(docs, min_count=params.min_count, by="tf")
    if len(vocab) == 0:
        raise DomainError(f"no token occurs at least {params.min_count} times")
    sentences = [np.asarray(vocab.ids(d), dtype=np.int64) for d in docs]
    centers, contexts = skipgram_pairs(sentences, params.window)
    counts = np.bincount(np.concatenate([s for s in sentences if len(s)] or [np.zeros(0, np.int64)]),
                         minlength=len(vocab))
    noise_cdf = np.cumsum(noise_distribution(counts))
    noise_cdf[-1] = 1.0

    rng = np.random.Generator(np.random.PCG64(params.seed))
    w_in = (rng.random((len(vocab), params.dim)) - 0.5) / params.dim
    w_out = np.zeros((len(vocab), params.dim))
    n_pairs = len(centers)
    total = max(n_pairs * params.epochs, 1)
    losses = []
    for epoch in range(params.epochs):
        negatives = np.searchsorted(noise_cdf, rng.random((n_pairs, params.negatives)), side="right")
        step = epoch * n_pairs + np.arange(n_pairs)
        lrs = params.lr - (params.lr - params.lr / 10.0) * step / total
        losses.append(float(_sgns_epoch(w_in, w_out, centers, contexts, negatives.astype(np.int64), lrs)))
    if not (np.isfinite(w_in).all() and np.isfinite(w_out).all()):
        raise FloatingPointError("word2vec training produced non-finite vectors")
    return EmbeddingTable(vocab, w_in, w_out, losses)


def embed_mean(table: EmbeddingTable, doc: Iterable[str]) -> np.ndarray:
    ids = table.vocabulary.ids(doc)
    if not ids:
        return np.zeros(table.dim)
    return table.input_vectors[ids].mean(axis=0)


def embed_matrix(table: EmbeddingTable, docs: Sequence[Iterable[str]]) -> np.ndarray:
    if not len(docs):
        return np.zeros((0, table.dim))
    return np.vstack([embed_mean(table, d) for d in docs])


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write the plain ``V d`` header + one ``token v1 ... vd`` line per token."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocabulary)} {table.dim}\n")
        for token, row in zip(table.vocabulary.tokens, table.input_vectors):
            fh.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(Path(path), encoding="utf-8") as fh:
        n, dim = (int(x) for x in fh.readline().split())
        tokens, rows = [], np.empty((n, dim))
        for i, line in enumerate(fh):
            parts = line.rstrip("\n").split(" ")
            tokens.append(parts[0])
            rows[i] = [float(x) for x in parts[1:]]
    return tokens, rows
