"""Command-line entry point: ``veritext {stats,train,evaluate,predict,experiment,gradcheck}``.

Exit codes: 0 success, 2 I/O / parse / config error, 3 invalid (model,
features) pair, 4 training divergence, 5 unsupported artifact version,
6 gradient check failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import artifact
from .config import ConfigError, ExperimentConfig, check_pair
from .corpus import DatasetError, DomainError, Label, corpus_stats, load_dataset, read_rows
from .experiment import run_experiment
from .gradcheck import run_gradcheck
from .linear import TrainingError
from .metrics import evaluate
from .pipeline import fit_classifier

log = logging.getLogger("veritext")

EXIT_OK, EXIT_IO, EXIT_PAIR, EXIT_DIVERGED, EXIT_VERSION, EXIT_GRADCHECK = 0, 2, 3, 4, 5, 6


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(path) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(path) if path else ExperimentConfig.default()
    if cfg.seed_overridden:
        print(f"seed {cfg.seed} taken from VERITEXT_SEED")
    return cfg


def cmd_stats(args) -> int:
    corpus = load_dataset(args.data, args.format)
    if not corpus.posts:
        raise CommandError(f"{args.data}: no posts to summarize", EXIT_IO)
    stats = corpus_stats(corpus, args.pipeline)
    print(f"file: {args.data}")
    print(f"pipeline: {args.pipeline}")
    print(stats.format())
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        check_pair(args.model, args.features)
    except ConfigError as exc:
        raise CommandError(str(exc), EXIT_PAIR) from None
    cfg = _load_config(args.config)
    corpus = load_dataset(args.data, args.format)
    start = time.perf_counter()
    clf, train_log = fit_classifier(args.model, args.features, corpus.texts, corpus.labels, cfg)
    elapsed = time.perf_counter() - start
    artifact.save(clf, args.out)
    objective = f"{train_log.final:.6f}" if train_log.epochs else "n/a"
    print(f"model: {args.model}/{args.features}  seed: {cfg.seed}")
    print(f"final training objective: {objective}")
    print(f"elapsed: {elapsed:.1f}s")
    print(f"wrote {args.out}")
    return EXIT_OK


def _metrics_csv(report, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["accuracy", "f1_weighted", "f1_positive", "precision", "recall", "tp", "fp", "fn", "tn"])
        cm = report.confusion
        writer.writerow([f"{report.accuracy:.6f}", f"{report.f1_weighted:.6f}", f"{report.f1_positive:.6f}",
                         f"{report.precision:.6f}", f"{report.recall:.6f}", cm.tp, cm.fp, cm.fn, cm.tn])


def cmd_evaluate(args) -> int:
    clf = artifact.load(args.model_file)
    corpus = load_dataset(args.data, args.format)
    if not corpus.posts:
        raise CommandError(f"{args.data}: no posts to evaluate", EXIT_IO)
    report = evaluate(clf.predict(corpus.texts), corpus.labels)
    print(f"model: {clf.model_kind}/{clf.features}  data: {args.data}")
    print(report.format())
    if args.csv:
        _metrics_csv(report, args.csv)
    return EXIT_OK


def cmd_predict(args) -> int:
    clf = artifact.load(args.model_file)
    rows = list(read_rows(args.input, args.format, need_label=False))
    labels = clf.predict([text for _, _, text, _ in rows]) if rows else np.zeros(0, dtype=np.int64)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "label"])
        for (_, post_id, _, _), label in zip(rows, labels):
            writer.writerow([post_id, Label(int(label)).name.lower()])
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    table = run_experiment(cfg)
    csv_path, text_path = cfg.path("output", "csv"), cfg.path("output", "table")
    table.write(csv_path, text_path)
    print(table.to_text(), end="")
    print(f"wrote {csv_path} and {text_path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = run_gradcheck(corrupt=args.corrupt)
    for row in report:
        status = "ok" if row.passed else "FAIL"
        print(f"{row.block:<28} max rel err {row.error:.3e}  (< {row.threshold:g})  {status}")
    failed = [r.block for r in report if not r.passed]
    if failed:
        raise CommandError(f"gradient check failed for {', '.join(failed)}", EXIT_GRADCHECK)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veritext", description="COVID-19 fake-news text classification toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus counts and word statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--pipeline", choices=["raw", "classic"], default="raw")
    p.add_argument("--format", choices=["tsv", "csv"])
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="fit one model and write an artifact")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["tsv", "csv"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score an artifact on a labeled file")
    p.add_argument("--model-file", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--csv", help="also write the metrics as CSV")
    p.add_argument("--format", choices=["tsv", "csv"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label every row of a file")
    p.add_argument("--model-file", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["tsv", "csv"])
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run a results grid from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    p.add_argument("--corrupt", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except artifact.ArtifactVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except TrainingError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DatasetError, ConfigError, artifact.ArtifactError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
