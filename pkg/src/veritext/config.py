"""Experiment configuration: an INI file with one section per stage.

Every key is optional. ``snapshot()`` renders the fully-defaulted
configuration in a canonical order; it is embedded in every artifact and
results file so a run can be repeated from its own output.
"""

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .corpus import DEFAULT_KEEP, Pipeline, SplitSpec
from .features import Word2VecParams
from .linear import LogRegParams, SVMParams
from .trees import BoostParams, ForestParams

log = logging.getLogger(__name__)

SEED_ENV = "VERITEXT_SEED"

MODELS = ("nb", "logreg", "forest", "boost", "svm", "encoder")
FEATURES = ("tfidf", "word2vec", "tokens")

# Table order: tf-idf baselines, word2vec baselines, then the encoder.
GRID_CELLS = (
    "nb:tfidf, logreg:tfidf, forest:tfidf, boost:tfidf, svm:tfidf, "
    "logreg:word2vec, forest:word2vec, boost:word2vec, svm:word2vec, encoder:tokens"
)

DEFAULTS: dict[str, dict[str, str]] = {
    "experiment": {
        "seed": "42",
        "cells": GRID_CELLS,
        "eval_split": "validation",
        "record_seconds": "true",
    },
    "data": {
        "train": "data/Constraint_Train.csv",
        "validation": "data/Constraint_Val.csv",
        "test": "data/english_test_with_labels.csv",
        "format": "",
    },
    "split": {"resplit": "true", "ratio": "0.9", "seed": ""},
    "preprocess": {"baseline": "classic", "encoder": "raw", "keep": DEFAULT_KEEP},
    "tfidf": {"min_count": "1"},
    "word2vec": {"dim": "300", "window": "5", "negatives": "5", "epochs": "5",
                 "lr": "0.025", "min_count": "2"},
    "nb": {"alpha": "1.0"},
    "logreg": {"reg": "1e-4", "lr": "0.1", "epochs": "100"},
    "svm": {"reg": "1e-4", "epochs": "20"},
    "forest": {"n_trees": "100", "max_depth_tfidf": "40", "max_depth_word2vec": "none",
               "max_features": "sqrt", "bootstrap": "true", "min_leaf": "1"},
    "boost": {"rounds": "100", "learning_rate": "0.1", "max_depth": "3", "reg": "1.0"},
    "encoder": {"d_model": "64", "heads": "4", "layers": "2", "d_ff": "128", "max_len": "128",
                "epochs": "3", "batch_size": "32", "lr": "1e-3", "min_count": "2"},
    "output": {"csv": "results.csv", "table": "results.txt"},
}


class ConfigError(ValueError):
    pass


def parse_cells(text: str) -> list[tuple[str, str]]:
    cells = []
    for item in text.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        model, sep, features = item.partition(":")
        if not sep:
            raise ConfigError(f"cell {item!r} is not of the form model:features")
        cells.append((model.strip(), features.strip()))
    return cells


def check_pair(model: str, features: str) -> None:
    """Reject (model, features) pairs outside the published baseline grid."""
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if features not in FEATURES:
        raise ConfigError(f"unknown features {features!r}; choose from {', '.join(FEATURES)}")
    if model == "encoder" and features != "tokens":
        raise ConfigError("the encoder consumes token sequences; use --features tokens")
    if model != "encoder" and features == "tokens":
        raise ConfigError(f"{model} needs vector features (tfidf or word2vec), not tokens")
    if model == "nb" and features == "word2vec":
        raise ConfigError(
            "Naive Bayes runs on tf-idf counts only; the published baseline grid "
            "has no Naive Bayes word2vec row"
        )


@dataclass
class ExperimentConfig:
    values: dict[str, dict[str, str]]
    base_dir: Path = Path(".")
    seed_overridden: bool = False

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.from_text("")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        return cls.from_text(text, base_dir=path.parent)

    @classmethod
    def from_text(cls, text: str, base_dir=".", env: dict | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        values = {s: dict(keys) for s, keys in DEFAULTS.items()}
        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                values[section][key] = value.strip()
        env = os.environ if env is None else env
        overridden = False
        if env.get(SEED_ENV):
            values["experiment"]["seed"] = env[SEED_ENV].strip()
            overridden = True
        cfg = cls(values, Path(base_dir), overridden)
        cfg.validate()
        return cfg

    # typed accessors

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def get_int(self, section: str, key: str) -> int:
        try:
            return int(self.get(section, key))
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {self.get(section, key)!r}") from None

    def get_float(self, section: str, key: str) -> float:
        try:
            return float(self.get(section, key))
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {self.get(section, key)!r}") from None

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.get(section, key).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} must be a boolean, got {raw!r}")

    def get_optional_int(self, section: str, key: str) -> int | None:
        if self.get(section, key).lower() in ("", "none"):
            return None
        return self.get_int(section, key)

    def validate(self) -> None:
        for model, features in self.cells:
            check_pair(model, features)
        if self.get("experiment", "eval_split") not in ("validation", "test"):
            raise ConfigError("[experiment] eval_split must be 'validation' or 'test'")
        for stage in ("baseline", "encoder"):
            try:
                Pipeline(self.get("preprocess", stage))
            except ValueError:
                raise ConfigError(f"[preprocess] {stage} must be 'classic' or 'raw'") from None
        self.split_spec()
        self.seed

    @property
    def seed(self) -> int:
        return self.get_int("experiment", "seed")

    @property
    def cells(self) -> list[tuple[str, str]]:
        return parse_cells(self.get("experiment", "cells"))

    def path(self, section: str, key: str) -> Path:
        p = Path(self.get(section, key))
        return p if p.is_absolute() else self.base_dir / p

    def split_spec(self) -> SplitSpec:
        seed = self.get_optional_int("split", "seed")
        try:
            return SplitSpec(self.get_float("split", "ratio"), self.seed if seed is None else seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def pipeline(self, stage: str) -> Pipeline:
        return Pipeline(self.get("preprocess", stage))

    def word2vec_params(self) -> Word2VecParams:
        return Word2VecParams(
            dim=self.get_int("word2vec", "dim"),
            window=self.get_int("word2vec", "window"),
            negatives=self.get_int("word2vec", "negatives"),
            epochs=self.get_int("word2vec", "epochs"),
            lr=self.get_float("word2vec", "lr"),
            min_count=self.get_int("word2vec", "min_count"),
            seed=self.seed,
        )

    def logreg_params(self) -> LogRegParams:
        return LogRegParams(self.get_float("logreg", "reg"), self.get_float("logreg", "lr"),
                            self.get_int("logreg", "epochs"), self.seed)

    def svm_params(self) -> SVMParams:
        return SVMParams(self.get_float("svm", "reg"), self.get_int("svm", "epochs"), self.seed)

    def forest_params(self, features: str) -> ForestParams:
        m = self.get("forest", "max_features").lower()
        return ForestParams(
            n_trees=self.get_int("forest", "n_trees"),
            max_depth=self.get_optional_int("forest", f"max_depth_{features}"),
            max_features=None if m in ("sqrt", "", "none") else self.get_int("forest", "max_features"),
            bootstrap=self.get_bool("forest", "bootstrap"),
            min_leaf=self.get_int("forest", "min_leaf"),
            seed=self.seed,
        )

    def boost_params(self) -> BoostParams:
        return BoostParams(
            rounds=self.get_int("boost", "rounds"),
            learning_rate=self.get_float("boost", "learning_rate"),
            max_depth=self.get_int("boost", "max_depth"),
            reg=self.get_float("boost", "reg"),
            seed=self.seed,
        )

    def encoder_shape(self) -> dict[str, int]:
        return {k: self.get_int("encoder", k) for k in ("d_model", "heads", "layers", "d_ff", "max_len")}

    def snapshot(self) -> str:
        """Canonical INI rendering of every key, defaults included."""
        lines = []
        for section in DEFAULTS:
            lines.append(f"[{section}]")
            for key in DEFAULTS[section]:
                value = " ".join(self.values[section][key].split())
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)
