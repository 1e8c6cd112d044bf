"""Binary confusion matrices and the derived accuracy / precision / recall / F1.

FAKE is the positive class. Any 0/0 ratio is reported as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import DomainError, Label


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def format(self) -> str:
        return (
            "              gold FAKE  gold REAL\n"
            f"pred FAKE  {self.tp:>10d} {self.fp:>10d}\n"
            f"pred REAL  {self.fn:>10d} {self.tn:>10d}"
        )


def _as_labels(values) -> np.ndarray:
    return np.array([int(v) for v in values], dtype=np.int64)


def confusion(pred, gold) -> ConfusionMatrix:
    pred, gold = _as_labels(pred), _as_labels(gold)
    if len(pred) != len(gold):
        raise DomainError(f"prediction length {len(pred)} differs from gold length {len(gold)}")
    if len(gold) == 0:
        raise DomainError("cannot build a confusion matrix from zero samples")
    fake, real = int(Label.FAKE), int(Label.REAL)
    return ConfusionMatrix(
        tp=int(((pred == fake) & (gold == fake)).sum()),
        fp=int(((pred == fake) & (gold == real)).sum()),
        fn=int(((pred == real) & (gold == fake)).sum()),
        tn=int(((pred == real) & (gold == real)).sum()),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return _ratio(2 * p * r, p + r)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1_positive: float
    f1_negative: float
    f1_weighted: float
    confusion: ConfusionMatrix

    def format(self) -> str:
        return (
            "positive class: FAKE\n"
            f"accuracy     {self.accuracy:.4f}\n"
            f"f1_weighted  {self.f1_weighted:.4f}\n"
            f"f1_positive  {self.f1_positive:.4f}\n"
            f"precision    {self.precision:.4f}\n"
            f"recall       {self.recall:.4f}\n"
            f"{self.confusion.format()}"
        )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total <= 0:
        raise DomainError("metrics need at least one sample")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1_pos = _f1(precision, recall)
    f1_neg = _f1(_ratio(cm.tn, cm.tn + cm.fn), _ratio(cm.tn, cm.tn + cm.fp))
    support_pos = cm.tp + cm.fn
    support_neg = cm.tn + cm.fp
    weighted = (support_pos * f1_pos + support_neg * f1_neg) / cm.total
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f1_positive=f1_pos,
        f1_negative=f1_neg,
        f1_weighted=weighted,
        confusion=cm,
    )


def evaluate(pred, gold) -> MetricsReport:
    return metrics(confusion(pred, gold))
