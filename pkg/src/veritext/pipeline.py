"""End-to-end text classifiers: a featurizer paired with a fitted model."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .config import ExperimentConfig, check_pair
from .corpus import Pipeline, stopword_hash, tokenize_all
from .encoder import EncoderModel, EncoderTrainParams, TokenVocab, predict_logits, train_encoder
from .features import (
    EmbeddingTable,
    TfidfModel,
    count_matrix,
    embed_matrix,
    fit_tfidf,
    tfidf_matrix,
    train_word2vec,
)
from .linear import LinearModel, NaiveBayesModel, TrainLog, logreg_fit, nb_fit, svm_fit
from .trees import BoostedModel, ForestModel, boost_fit, forest_fit

log = logging.getLogger(__name__)


@dataclass
class TextClassifier:
    model_kind: str
    features: str
    pipeline: Pipeline
    keep: str
    featurizer: TfidfModel | EmbeddingTable | TokenVocab
    model: Any
    config_snapshot: str
    stopwords_sha256: str = stopword_hash()

    def tokenize(self, texts: Sequence[str]):
        return [list(t.tokens) for t in tokenize_all(texts, self.pipeline, self.keep)]

    def featurize(self, texts: Sequence[str]):
        docs = self.tokenize(texts)
        if self.features == "tokens":
            return docs
        if self.features == "word2vec":
            return embed_matrix(self.featurizer, docs)
        if self.model_kind == "nb":
            return count_matrix(self.featurizer.vocabulary, docs)
        return tfidf_matrix(self.featurizer, docs)

    def scores(self, texts: Sequence[str]) -> np.ndarray:
        """Decision scores; ``> 0`` means FAKE for every model kind."""
        if not len(texts):
            return np.zeros(0)
        X = self.featurize(texts)
        m = self.model
        if isinstance(m, NaiveBayesModel):
            s = m.log_scores(X)
            return s[:, 1] - s[:, 0]
        if isinstance(m, LinearModel):
            return m.scores(X)
        if isinstance(m, ForestModel):
            return m.scores(X) - 0.5
        if isinstance(m, BoostedModel):
            return m.margin(X)
        if isinstance(m, EncoderModel):
            logits = predict_logits(m, self.featurizer, X)
            return logits[:, 1] - logits[:, 0]
        raise TypeError(f"unsupported model {type(m).__name__}")

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return (self.scores(texts) > 0).astype(np.int64)


def fit_classifier(model_kind: str, features: str, texts: Sequence[str], labels,
                   cfg: ExperimentConfig | None = None,
                   cache: dict | None = None) -> tuple[TextClassifier, TrainLog]:
    """Fit featurizer and model on ``texts``; returns the classifier and its training log.

    ``cache`` lets several cells over the same training texts share one fitted
    featurizer (word2vec training dominates otherwise).
    """
    check_pair(model_kind, features)
    cfg = cfg or ExperimentConfig.default()
    labels = np.asarray(labels, dtype=np.int64)
    stage = "encoder" if model_kind == "encoder" else "baseline"
    pipeline = cfg.pipeline(stage)
    keep = cfg.get("preprocess", "keep")
    docs = [list(t.tokens) for t in tokenize_all(texts, pipeline, keep)]
    train_log = TrainLog()

    if features == "tokens":
        ep = EncoderTrainParams(
            epochs=cfg.get_int("encoder", "epochs"),
            batch_size=cfg.get_int("encoder", "batch_size"),
            lr=cfg.get_float("encoder", "lr"),
            min_count=cfg.get_int("encoder", "min_count"),
            seed=cfg.seed,
        )
        model, vocab, train_log = train_encoder(docs, labels, cfg.encoder_shape(), ep)
        return TextClassifier(model_kind, features, pipeline, keep, vocab, model, cfg.snapshot()), train_log

    t0 = time.perf_counter()
    key = (features, pipeline, keep, cfg.snapshot(), id(texts))
    if cache is not None and key in cache:
        featurizer = cache[key]
    elif features == "tfidf":
        featurizer = fit_tfidf(docs, cfg.get_int("tfidf", "min_count"))
    else:
        featurizer = train_word2vec(docs, cfg.word2vec_params())
    if cache is not None:
        cache[key] = featurizer
    if features == "tfidf":
        X = count_matrix(featurizer.vocabulary, docs) if model_kind == "nb" else tfidf_matrix(featurizer, docs)
    else:
        X = embed_matrix(featurizer, docs)
    log.info("%s features: %s in %.1fs", features, X.shape, time.perf_counter() - t0)

    if model_kind == "nb":
        model = nb_fit(X, labels, cfg.get_float("nb", "alpha"))
    elif model_kind == "logreg":
        model, train_log = logreg_fit(X, labels, cfg.logreg_params())
    elif model_kind == "svm":
        model, train_log = svm_fit(X, labels, cfg.svm_params())
    elif model_kind == "forest":
        model = forest_fit(X, labels, cfg.forest_params(features))
    else:
        model, train_log = boost_fit(X, labels, cfg.boost_params())
    return TextClassifier(model_kind, features, pipeline, keep, featurizer, model, cfg.snapshot()), train_log
