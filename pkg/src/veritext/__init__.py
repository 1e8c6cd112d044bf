"""Fake-news classification of short COVID-19 social-media posts.

Classic baselines (Naive Bayes, logistic regression, random forest, Newton
boosting, linear SVM) over tf-idf or word2vec features, plus a small
transformer encoder trained from scratch.
"""

from .corpus import Corpus, Label, LabeledPost, Pipeline, SplitSpec, combine_and_split, corpus_stats, load_dataset
from .metrics import ConfusionMatrix, MetricsReport, confusion, evaluate, metrics

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Label", "LabeledPost", "Pipeline", "SplitSpec", "combine_and_split", "corpus_stats",
    "load_dataset", "ConfusionMatrix", "MetricsReport", "confusion", "evaluate", "metrics",
]
