"""Run a grid of (model, features) cells and render the results table."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig
from .corpus import Corpus, combine_and_split, load_dataset
from .metrics import MetricsReport, evaluate
from .pipeline import fit_classifier

log = logging.getLogger(__name__)

METHOD_NAMES = {
    "nb": "Naive Bayes Model",
    "logreg": "Linear Classifier",
    "forest": "Bagging Model",
    "boost": "Boosting Model",
    "svm": "SVM Model",
    "encoder": "Transformer Encoder",
}

CSV_HEADER = ["method", "features", "accuracy", "f1_weighted", "f1_positive", "seconds"]


@dataclass
class ResultRow:
    model: str
    features: str
    report: MetricsReport
    seconds: float

    @property
    def method(self) -> str:
        return METHOD_NAMES[self.model]


@dataclass
class ResultsTable:
    split: str
    config_snapshot: str
    seed: int
    rows: list[ResultRow] = field(default_factory=list)
    record_seconds: bool = True

    def _comment_lines(self) -> list[str]:
        lines = [f"positive class: FAKE", f"split: {self.split}", f"seed: {self.seed}", "config:"]
        lines += self.config_snapshot.rstrip("\n").split("\n")
        return lines

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self._comment_lines():
            buf.write(f"# {line}".rstrip() + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            seconds = f"{r.seconds:.3f}" if self.record_seconds else "0"
            writer.writerow([r.method, r.features, f"{r.report.accuracy:.6f}",
                             f"{r.report.f1_weighted:.6f}", f"{r.report.f1_positive:.6f}", seconds])
        return buf.getvalue()

    def to_text(self) -> str:
        title = f"Results on the {self.split} split (accuracy / weighted F1)"
        width = max([len("Method")] + [len(f"{r.method}({r.features})") for r in self.rows])
        rule = "-" * (width + 32)
        out = [title, rule, f"{'Method':<{width}}  {'Accuracy':>9}  {'F1-score':>9}  {'sec':>7}", rule]
        previous = None
        for r in self.rows:
            if previous is not None and r.features != previous:
                out.append(rule)
            previous = r.features
            seconds = f"{r.seconds:7.1f}" if self.record_seconds else f"{'-':>7}"
            out.append(f"{r.method + '(' + r.features + ')':<{width}}  {r.report.accuracy:>9.3f}  "
                       f"{r.report.f1_weighted:>9.3f}  {seconds}")
        out.append(rule)
        out += ["", *self._comment_lines()]
        return "\n".join(out) + "\n"

    def write(self, csv_path, text_path) -> None:
        for path, content in ((csv_path, self.to_csv()), (text_path, self.to_text())):
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding="utf-8")


def load_splits(cfg: ExperimentConfig) -> tuple[Corpus, Corpus]:
    """Training corpus and evaluation corpus as selected by the config."""
    fmt = cfg.get("data", "format") or None
    train = load_dataset(cfg.path("data", "train"), fmt, name="train")
    eval_split = cfg.get("experiment", "eval_split")
    if cfg.get_bool("split", "resplit"):
        validation = load_dataset(cfg.path("data", "validation"), fmt, name="validation")
        train, held_out = combine_and_split(train, validation, cfg.split_spec())
    else:
        held_out = None
    if eval_split == "test":
        return train, load_dataset(cfg.path("data", "test"), fmt, name="test")
    if held_out is None:
        held_out = load_dataset(cfg.path("data", "validation"), fmt, name="validation")
    return train, held_out


def run_experiment(cfg: ExperimentConfig, splits: tuple[Corpus, Corpus] | None = None) -> ResultsTable:
    """Fit every configured cell on the training split and score it on the
    evaluation split. Rows follow the configured cell order."""
    cells = cfg.cells
    table = ResultsTable(cfg.get("experiment", "eval_split"), cfg.snapshot(), cfg.seed,
                         record_seconds=cfg.get_bool("experiment", "record_seconds"))
    if not cells:
        return table
    train, held_out = splits if splits is not None else load_splits(cfg)
    texts, labels = train.texts, train.labels
    cache: dict = {}
    for model, features in cells:
        start = time.perf_counter()
        clf, _ = fit_classifier(model, features, texts, labels, cfg, cache)
        pred = clf.predict(held_out.texts)
        report = evaluate(pred, held_out.labels)
        seconds = time.perf_counter() - start
        log.info("%s/%s: acc %.4f f1 %.4f (%.1fs)", model, features, report.accuracy, report.f1_weighted, seconds)
        table.rows.append(ResultRow(model, features, report, seconds))
    return table
